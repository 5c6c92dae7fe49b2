from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field


class Witness(BaseModel):
    """One table entry where the two sides of a check disagree."""

    model_config = ConfigDict(frozen=True)

    where: str
    given: Dict[str, str] = Field(default_factory=dict)
    outcome: Dict[str, str] = Field(default_factory=dict)
    left: float
    right: float
    conflicting_given: Optional[Dict[str, str]] = None

    @computed_field
    @property
    def residual(self) -> float:
        return abs(self.left - self.right)


class SquareResult(BaseModel):
    """Residual of one commuting square or one query comparison."""

    model_config = ConfigDict(frozen=True)

    name: str
    residual: float
    skipped: int = 0


class AbstractionReport(BaseModel):
    """Verdict of an abstraction check: residual per square plus the worst offenders."""

    model_config = ConfigDict(frozen=True)

    check: str
    tolerance: float
    squares: Tuple[SquareResult, ...] = ()
    witnesses: Tuple[Witness, ...] = ()
    skipped: int = 0
    notes: Tuple[str, ...] = ()
    failures: Tuple[str, ...] = ()

    @computed_field
    @property
    def max_residual(self) -> float:
        return max((s.residual for s in self.squares), default=0.0)

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.failures and all(s.residual <= self.tolerance for s in self.squares)

    def residual_of(self, name: str) -> float:
        return next(s.residual for s in self.squares if s.name == name)

    def failing(self) -> List[SquareResult]:
        return [s for s in self.squares if s.residual > self.tolerance]


class RuleRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    assignment: Dict[str, str]
    residual: Optional[float] = None  # None when the conditioning event has zero mass


class RuleReport(BaseModel):
    """Numeric check of one do-calculus rule on the low-level model."""

    model_config = ConfigDict(frozen=True)

    rule: int
    applicable: bool
    statement: str
    high_graph: str
    left: str
    right: str
    tolerance: float
    rows: Tuple[RuleRow, ...] = ()

    @computed_field
    @property
    def skipped(self) -> int:
        return sum(1 for r in self.rows if r.residual is None)

    @computed_field
    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.rows if r.residual is not None), default=0.0)

    @computed_field
    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


class RuleApplicability(BaseModel):
    """Whether a do-calculus rule is licensed on a graph, and the d-separation it rests on."""

    model_config = ConfigDict(frozen=True)

    rule: int
    applicable: bool
    statement: str
    surgered: str
