from typing import FrozenSet, Iterable, Literal

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from abscheck.errors import InvalidQuery, OverlappingSets
from abscheck.models.graph import NodeId, _Graph


def _as_frozenset(v):
    if isinstance(v, str):
        raise ValueError("expected a collection of node names, got a string")
    return frozenset(v)


class Query(BaseModel):
    """Interventional query signature p(outcome_set | do(do_set))."""

    model_config = ConfigDict(frozen=True)

    do_set: FrozenSet[NodeId] = frozenset()
    outcome_set: FrozenSet[NodeId] = frozenset()

    @field_validator("do_set", "outcome_set", mode="before")
    @classmethod
    def _coerce(cls, v):
        return _as_frozenset(v)

    @model_validator(mode="after")
    def _disjoint(self):
        shared = self.do_set & self.outcome_set
        if shared:
            raise OverlappingSets(shared)
        return self

    def on(self, g: _Graph) -> "Query":
        unknown = sorted((self.do_set | self.outcome_set) - set(g.nodes))
        if unknown:
            raise InvalidQuery(f"query names nodes {unknown} outside the graph")
        return self

    def __str__(self):
        out = ",".join(sorted(self.outcome_set)) or "I"
        if not self.do_set:
            return f"p({out})"
        return f"p({out} | do({','.join(sorted(self.do_set))}))"


class RuleQuery(BaseModel):
    """One application of a do-calculus rule: p(y | do(x), z, w) against its reduced form."""

    model_config = ConfigDict(frozen=True)

    rule: Literal[1, 2, 3]
    x: FrozenSet[NodeId] = frozenset()
    y: FrozenSet[NodeId]
    z: FrozenSet[NodeId] = frozenset()
    w: FrozenSet[NodeId] = frozenset()

    @field_validator("x", "y", "z", "w", mode="before")
    @classmethod
    def _coerce(cls, v):
        return _as_frozenset(v)

    @model_validator(mode="after")
    def _check(self):
        sets = [self.x, self.y, self.z, self.w]
        shared = set()
        for i, a in enumerate(sets):
            for b in sets[i + 1 :]:
                shared |= a & b
        if shared:
            raise OverlappingSets(shared)
        if not self.y:
            raise InvalidQuery("rule queries need a nonempty y")
        return self

    def nodes(self) -> FrozenSet[str]:
        return self.x | self.y | self.z | self.w

    def on(self, g: _Graph) -> "RuleQuery":
        unknown = sorted(self.nodes() - set(g.nodes))
        if unknown:
            raise InvalidQuery(f"rule query names nodes {unknown} outside the graph")
        return self


def node_list(text: str) -> Iterable[str]:
    """Parse 'A,B' into node names; empty text is the empty set."""
    return [t.strip() for t in text.split(",") if t.strip()]
