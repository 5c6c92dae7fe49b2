from typing import Annotated, Dict, FrozenSet, Iterable, List, Literal, Optional, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, StringConstraints, model_validator

from abscheck.errors import (
    ClusterMapError,
    CycleError,
    DuplicateNode,
    GraphError,
    UnknownNode,
)

NodeId = Annotated[str, StringConstraints(min_length=1)]
Edge = Tuple[NodeId, NodeId]

REMOVED = None


def _reject_duplicate_edges(data, key: str):
    if isinstance(data, dict) and isinstance(data.get(key), (list, tuple)):
        seen = set()
        for edge in data[key]:
            pair = tuple(edge)
            if pair in seen:
                raise GraphError(f"Duplicate edge {pair[0]}->{pair[1]}")
            seen.add(pair)
        data = {**data, key: frozenset(tuple(e) for e in data[key])}
    return data


class _Graph(BaseModel):
    model_config = ConfigDict(frozen=True)

    nodes: Tuple[NodeId, ...]

    def _check_nodes(self):
        seen = set()
        for n in self.nodes:
            if n in seen:
                raise DuplicateNode(n)
            seen.add(n)

    def has(self, n: str) -> bool:
        return n in self.nodes

    def require(self, *names: str):
        for n in names:
            if n not in self.nodes:
                raise UnknownNode(n)

    def index(self, n: str) -> int:
        self.require(n)
        return self.nodes.index(n)

    def order(self, names: Iterable[str]) -> Tuple[str, ...]:
        """Return `names` sorted by declaration order."""
        names = set(names)
        self.require(*sorted(names))
        return tuple(n for n in self.nodes if n in names)


class Dag(_Graph):
    """Directed acyclic graph, optionally with designated latent nodes."""

    edges: FrozenSet[Edge] = frozenset()
    latent: FrozenSet[NodeId] = frozenset()

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data):
        return _reject_duplicate_edges(data, "edges")

    @model_validator(mode="after")
    def _check(self):
        self._check_nodes()
        declared = set(self.nodes)
        for a, b in self.edges:
            if a not in declared:
                raise UnknownNode(a, "edge list")
            if b not in declared:
                raise UnknownNode(b, "edge list")
            if a == b:
                raise GraphError(f"Self-loop on '{a}'")
        for u in self.latent:
            if u not in declared:
                raise UnknownNode(u, "latent set")
        g = self.to_networkx()
        if not nx.is_directed_acyclic_graph(g):
            raise CycleError([a for a, _ in nx.find_cycle(g)])
        return self

    @property
    def observed(self) -> Tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in self.latent)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def sorted_edges(self) -> List[Edge]:
        pos = {n: i for i, n in enumerate(self.nodes)}
        return sorted(self.edges, key=lambda e: (pos[e[0]], pos[e[1]]))

    def __str__(self):
        body = ", ".join(f"{a}->{b}" for a, b in self.sorted_edges())
        return f"Dag[{', '.join(self.nodes)} | {body}]"


class Admg(_Graph):
    """Acyclic directed mixed graph; bidirected pairs are stored in declaration order."""

    directed: FrozenSet[Edge] = frozenset()
    bidirected: FrozenSet[Edge] = frozenset()

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data):
        data = _reject_duplicate_edges(data, "directed")
        if isinstance(data, dict) and data.get("bidirected"):
            pos = {n: i for i, n in enumerate(data.get("nodes", ()))}
            canon = set()
            for a, b in data["bidirected"]:
                if a in pos and b in pos and pos[b] < pos[a]:
                    a, b = b, a
                canon.add((a, b))
            data = {**data, "bidirected": frozenset(canon)}
        return data

    @model_validator(mode="after")
    def _check(self):
        self._check_nodes()
        declared = set(self.nodes)
        for a, b in list(self.directed) + list(self.bidirected):
            for n in (a, b):
                if n not in declared:
                    raise UnknownNode(n, "edge list")
            if a == b:
                raise GraphError(f"Self-loop on '{a}'")
        g = self.directed_graph()
        if not nx.is_directed_acyclic_graph(g):
            raise CycleError([a for a, _ in nx.find_cycle(g)])
        return self

    @classmethod
    def from_dag(cls, g: Dag) -> "Admg":
        return cls(nodes=g.nodes, directed=g.edges)

    def directed_graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.directed)
        return g

    def __str__(self):
        pos = {n: i for i, n in enumerate(self.nodes)}
        key = lambda e: (pos[e[0]], pos[e[1]])
        parts = [f"{a}->{b}" for a, b in sorted(self.directed, key=key)]
        parts += [f"{a}<->{b}" for a, b in sorted(self.bidirected, key=key)]
        return f"Admg[{', '.join(self.nodes)} | {', '.join(parts)}]"


class ClusterMap(BaseModel):
    """Partial surjection from low-level nodes onto high-level nodes.

    Low nodes mapped to REMOVED (None) belong to no cluster.
    """

    model_config = ConfigDict(frozen=True)

    low_nodes: Tuple[NodeId, ...]
    high_nodes: Tuple[NodeId, ...]
    assignment: Dict[NodeId, Optional[NodeId]]

    @model_validator(mode="after")
    def _check(self):
        if set(self.assignment) != set(self.low_nodes):
            missing = set(self.low_nodes) - set(self.assignment)
            extra = set(self.assignment) - set(self.low_nodes)
            raise ClusterMapError(
                f"Assignment must cover exactly the low nodes (missing {sorted(missing)}, extra {sorted(extra)})"
            )
        if len(set(self.high_nodes)) != len(self.high_nodes):
            raise ClusterMapError("Duplicate high node names")
        high = set(self.high_nodes)
        for low, h in self.assignment.items():
            if h is not None and h not in high:
                raise ClusterMapError(f"'{low}' is mapped to unknown high node '{h}'")
        hit = {h for h in self.assignment.values() if h is not None}
        empty = [h for h in self.high_nodes if h not in hit]
        if empty:
            raise ClusterMapError(f"Cluster map is not surjective: {', '.join(empty)} have no preimage")
        return self

    @classmethod
    def identity(cls, nodes: Iterable[str]) -> "ClusterMap":
        nodes = tuple(nodes)
        return cls(low_nodes=nodes, high_nodes=nodes, assignment={n: n for n in nodes})

    @classmethod
    def from_clusters(
        cls,
        low_nodes: Iterable[str],
        clusters: Dict[str, Iterable[str]],
        removed: Iterable[str] = (),
    ) -> "ClusterMap":
        low_nodes = tuple(low_nodes)
        assignment: Dict[str, Optional[str]] = {}
        for h, members in clusters.items():
            for m in members:
                if m in assignment:
                    raise ClusterMapError(f"'{m}' appears in two clusters")
                assignment[m] = h
        for r in removed:
            if r in assignment:
                raise ClusterMapError(f"'{r}' is both clustered and removed")
            assignment[r] = REMOVED
        return cls(low_nodes=low_nodes, high_nodes=tuple(clusters), assignment=assignment)

    def cluster(self, high: str) -> Tuple[str, ...]:
        if high not in self.high_nodes:
            raise UnknownNode(high, "cluster map")
        return tuple(n for n in self.low_nodes if self.assignment[n] == high)

    def clusters(self) -> Dict[str, Tuple[str, ...]]:
        return {h: self.cluster(h) for h in self.high_nodes}

    def cluster_of_set(self, highs: Iterable[str]) -> Tuple[str, ...]:
        """Concatenation of clusters in high declaration order."""
        highs = set(highs)
        out: List[str] = []
        for h in self.high_nodes:
            if h in highs:
                out.extend(self.cluster(h))
        return tuple(out)

    @property
    def removed(self) -> Tuple[str, ...]:
        return tuple(n for n in self.low_nodes if self.assignment[n] is REMOVED)

    def is_identity(self) -> bool:
        return self.low_nodes == self.high_nodes and all(k == v for k, v in self.assignment.items())


class GraphOp(BaseModel):
    """A single graphical-abstraction step: merge two nodes or delete one."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["merge", "delete"]
    node: NodeId
    other: Optional[NodeId] = None
    merged: Optional[NodeId] = None

    def __str__(self):
        if self.kind == "merge":
            return f"merge({self.node},{self.other})->{self.merged}"
        return f"delete({self.node})"


class MapValidation(BaseModel):
    """Outcome of validating a cluster map: a witness sequence or the reasons it fails."""

    model_config = ConfigDict(frozen=True)

    valid: bool
    cluster_map: ClusterMap
    witness: Tuple[GraphOp, ...] = ()
    abstracted: Optional[Dag] = None
    reasons: Tuple[str, ...] = ()
    cyclic_merges: Tuple[Tuple[str, str], ...] = ()
    blocked_confounders: Tuple[str, ...] = ()

    def require(self) -> "MapValidation":
        if not self.valid:
            raise ClusterMapError("Cluster map is not a graphical abstraction: " + "; ".join(self.reasons))
        return self
