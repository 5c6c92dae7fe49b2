"""Graph operations: orders, neighbourhoods, merge and delete surgery,
cluster-map validation, d-separation and latent projection.

All functions are pure: they take immutable graph values and return new ones.
"""

from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx

from abscheck.config import settings
from abscheck.errors import (
    ClusterMapError,
    DuplicateNode,
    GraphError,
    IsConfounder,
    MergeCreatesCycle,
    OverlappingSets,
)
from abscheck.models.graph import Admg, ClusterMap, Dag, GraphOp, MapValidation
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)

AnyGraph = Union[Dag, Admg]


def _digraph(g: AnyGraph) -> nx.DiGraph:
    return g.to_networkx() if isinstance(g, Dag) else g.directed_graph()


def _directed_edges(g: AnyGraph):
    return g.edges if isinstance(g, Dag) else g.directed


# -----------------------------------
# Orders and neighbourhoods
# -----------------------------------
def topological_order(g: AnyGraph) -> List[str]:
    """Topological order; ties go to the node declared first."""
    pos = {n: i for i, n in enumerate(g.nodes)}
    return list(nx.lexicographical_topological_sort(_digraph(g), key=pos.__getitem__))


def parents(g: AnyGraph, n: str) -> FrozenSet[str]:
    g.require(n)
    return frozenset(a for a, b in _directed_edges(g) if b == n)


def children(g: AnyGraph, n: str) -> FrozenSet[str]:
    g.require(n)
    return frozenset(b for a, b in _directed_edges(g) if a == n)


def ancestors(g: AnyGraph, n: str) -> FrozenSet[str]:
    g.require(n)
    return frozenset(nx.ancestors(_digraph(g), n))


def descendants(g: AnyGraph, n: str) -> FrozenSet[str]:
    g.require(n)
    return frozenset(nx.descendants(_digraph(g), n))


def ordered_parents(g: AnyGraph, n: str) -> Tuple[str, ...]:
    return g.order(parents(g, n))


# -----------------------------------
# Graphical abstraction operations
# -----------------------------------
def merge_nodes(g: Dag, a: str, b: str, merged_name: str) -> Dag:
    """Merge a and b into one node carrying the union of their edges.

    The merged node takes the declaration slot of whichever of a, b comes first.
    """
    g.require(a, b)
    if a == b:
        raise GraphError(f"Cannot merge '{a}' with itself")
    if merged_name in g.nodes and merged_name not in (a, b):
        raise DuplicateNode(merged_name)

    def rename(n):
        return merged_name if n in (a, b) else n

    edges = {(rename(u), rename(v)) for u, v in g.edges}
    edges = {(u, v) for u, v in edges if u != v}

    candidate = nx.DiGraph(list(edges))
    if candidate.number_of_edges() and not nx.is_directed_acyclic_graph(candidate):
        cycle = [u for u, _ in nx.find_cycle(candidate)]
        raise MergeCreatesCycle(a, b, cycle)

    first = min(g.index(a), g.index(b))
    nodes = []
    for i, n in enumerate(g.nodes):
        if i == first:
            nodes.append(merged_name)
        elif n not in (a, b):
            nodes.append(n)
    latent = {rename(n) for n in g.latent if n not in (a, b)}
    if a in g.latent and b in g.latent:
        latent.add(merged_name)
    return Dag(nodes=tuple(nodes), edges=frozenset(edges), latent=frozenset(latent))


def delete_node(g: Dag, a: str) -> Dag:
    """Remove a non-confounder, wiring its parents to its (at most one) child."""
    kids = children(g, a)
    if len(kids) > 1:
        raise IsConfounder(a, kids)
    pas = parents(g, a)
    edges = {(u, v) for u, v in g.edges if a not in (u, v)}
    edges |= {(p, c) for p in pas for c in kids}
    return Dag(
        nodes=tuple(n for n in g.nodes if n != a),
        edges=frozenset(edges),
        latent=g.latent - {a},
    )


def apply_operations(g: Dag, ops: Iterable[GraphOp]) -> Dag:
    for op in ops:
        if op.kind == "merge":
            g = merge_nodes(g, op.node, op.other, op.merged)
        else:
            g = delete_node(g, op.node)
    return g


# -----------------------------------
# Cluster maps
# -----------------------------------
class _Search:
    """Book-keeping for turning a cluster map into merge/delete steps.

    Current nodes are tracked by the set of low nodes they stand for; a node
    whose members are all removed is a pending deletion.
    """

    def __init__(self, low: Dag, cm: ClusterMap):
        self.low = low
        self.cm = cm
        self.pos = {n: i for i, n in enumerate(low.nodes)}
        self.targets = {frozenset(cm.cluster(h)): h for h in cm.high_nodes}
        self.removed = frozenset(cm.removed)

    def label(self, members: FrozenSet[str], graph: Dag, consumed: Tuple[str, ...]) -> str:
        name = "+".join(sorted(members, key=self.pos.__getitem__))
        taken = set(graph.nodes) - set(consumed)
        while name in taken:
            name += "'"
        return name

    def owner(self, members: FrozenSet[str]) -> Optional[str]:
        # high node of a (partial) cluster; None for removed groups
        first = next(iter(members))
        return self.cm.assignment[first]

    def is_goal(self, members: Dict[str, FrozenSet[str]]) -> bool:
        return all(m in self.targets for m in members.values())

    def merge_first(self, reasons: List[str], cyclic: List[Tuple[str, str]], blocked: List[str]):
        graph = self.low
        members = {n: frozenset([n]) for n in self.low.nodes}
        witness: List[GraphOp] = []
        for h in self.cm.high_nodes:
            cluster = self.cm.cluster(h)
            cur = cluster[0]
            for m in cluster[1:]:
                joined = members[cur] | members[m]
                name = self.label(joined, graph, (cur, m))
                try:
                    graph = merge_nodes(graph, cur, m, name)
                except MergeCreatesCycle as e:
                    reasons.append(str(e))
                    cyclic.append((cur, m))
                    return None
                witness.append(GraphOp(kind="merge", node=cur, other=m, merged=name))
                del members[cur], members[m]
                members[name] = joined
                cur = name

        pending = [n for n in self.cm.removed]
        while pending:
            for r in pending:
                if len(children(graph, r)) <= 1:
                    graph = delete_node(graph, r)
                    witness.append(GraphOp(kind="delete", node=r))
                    del members[r]
                    pending.remove(r)
                    break
            else:
                for r in pending:
                    kids = sorted(children(graph, r))
                    reasons.append(f"'{r}' is a confounder of {', '.join(kids)} and cannot be deleted")
                    blocked.append(r)
                return None
        return graph, members, witness

    def exhaustive(self):
        start = {n: frozenset([n]) for n in self.low.nodes}
        seen: Set[FrozenSet[FrozenSet[str]]] = set()

        def step(graph: Dag, members: Dict[str, FrozenSet[str]], path: List[GraphOp]):
            key = frozenset(members.values())
            if key in seen:
                return None
            seen.add(key)
            if self.is_goal(members):
                return graph, members, path

            for n, m in members.items():
                if m <= self.removed and len(children(graph, n)) <= 1:
                    nxt = dict(members)
                    del nxt[n]
                    found = step(delete_node(graph, n), nxt, path + [GraphOp(kind="delete", node=n)])
                    if found:
                        return found

            for u, v in combinations(list(members), 2):
                mu, mv = members[u], members[v]
                both_removed = mu <= self.removed and mv <= self.removed
                if not both_removed and (self.owner(mu) is None or self.owner(mu) != self.owner(mv)):
                    continue
                joined = mu | mv
                name = self.label(joined, graph, (u, v))
                try:
                    merged = merge_nodes(graph, u, v, name)
                except MergeCreatesCycle:
                    continue
                nxt = {k: s for k, s in members.items() if k not in (u, v)}
                nxt[name] = joined
                found = step(merged, nxt, path + [GraphOp(kind="merge", node=u, other=v, merged=name)])
                if found:
                    return found
            return None

        return step(self.low, start, [])

    def relabel(self, graph: Dag, members: Dict[str, FrozenSet[str]]) -> Dag:
        to_high = {n: self.targets[m] for n, m in members.items()}
        latent = {to_high[n] for n, m in members.items() if m <= self.low.latent}
        return Dag(
            nodes=self.cm.high_nodes,
            edges=frozenset((to_high[a], to_high[b]) for a, b in graph.edges),
            latent=frozenset(latent),
        )


def apply_cluster_map(low: Dag, cm: ClusterMap) -> MapValidation:
    """Build the graphical abstraction induced by `cm` together with a witness.

    Merges run first; if a merge closes a cycle or the greedy deletions stall,
    an exhaustive search over interleaved merges and deletions takes over as
    long as the map removes at most EXHAUSTIVE_REMOVAL_LIMIT nodes in total.
    """
    if set(cm.low_nodes) != set(low.nodes):
        raise ClusterMapError("Cluster map low nodes do not match the low graph")

    search = _Search(low, cm)
    reasons: List[str] = []
    cyclic: List[Tuple[str, str]] = []
    blocked: List[str] = []

    found = search.merge_first(reasons, cyclic, blocked)
    if found is None:
        if len(cm.removed) > settings.EXHAUSTIVE_REMOVAL_LIMIT:
            reasons.append(
                f"{len(cm.removed)} removed nodes exceed the exhaustive search limit "
                f"({settings.EXHAUSTIVE_REMOVAL_LIMIT})"
            )
        else:
            logger.debug("merge-first failed (%s); searching all operation orders", "; ".join(reasons))
            found = search.exhaustive()
            if found is None:
                reasons.append("no sequence of merges and deletions realizes the clustering")

    if found is None:
        return MapValidation(
            valid=False,
            cluster_map=cm,
            reasons=tuple(reasons),
            cyclic_merges=tuple(cyclic),
            blocked_confounders=tuple(blocked),
        )

    graph, members, witness = found
    return MapValidation(valid=True, cluster_map=cm, witness=tuple(witness), abstracted=search.relabel(graph, members))


def validate_cluster_map(low: Dag, high: Dag, cm: ClusterMap) -> MapValidation:
    """Check that `high` is the graphical abstraction of `low` witnessed by `cm`."""
    if set(cm.high_nodes) != set(high.nodes):
        raise ClusterMapError("Cluster map high nodes do not match the high graph")
    result = apply_cluster_map(low, cm)
    if not result.valid:
        return result

    got = result.abstracted.edges
    missing = sorted(high.edges - got)
    extra = sorted(got - high.edges)
    if missing or extra:
        reasons = []
        if missing:
            reasons.append("high edges without a low counterpart: " + ", ".join(f"{a}->{b}" for a, b in missing))
        if extra:
            reasons.append("abstraction has edges missing from the high graph: " + ", ".join(f"{a}->{b}" for a, b in extra))
        return result.model_copy(update={"valid": False, "reasons": tuple(reasons)})

    abstracted = Dag(nodes=high.nodes, edges=high.edges, latent=result.abstracted.latent)
    return result.model_copy(update={"abstracted": abstracted})


# -----------------------------------
# ADMGs
# -----------------------------------
def canonical_dag(g: AnyGraph) -> Dag:
    """Replace every bidirected edge A<->B by a fresh latent U with U->A, U->B."""
    if isinstance(g, Dag):
        return g
    nodes = list(g.nodes)
    edges = set(g.directed)
    latent = set()
    for a, b in sorted(g.bidirected, key=lambda e: (g.nodes.index(e[0]), g.nodes.index(e[1]))):
        u = f"U[{a},{b}]"
        while u in nodes:
            u += "'"
        nodes.append(u)
        latent.add(u)
        edges |= {(u, a), (u, b)}
    return Dag(nodes=tuple(nodes), edges=frozenset(edges), latent=frozenset(latent))


def _as_set(g: AnyGraph, s: Iterable[str]) -> Set[str]:
    s = set(s)
    g.require(*sorted(s))
    return s


def d_separated(g: AnyGraph, x: Iterable[str], y: Iterable[str], z: Iterable[str] = ()) -> bool:
    """d-separation of x and y given z; bidirected edges act as unconditioned latent parents."""
    x, y, z = _as_set(g, x), _as_set(g, y), _as_set(g, z)
    shared = (x & y) | (x & z) | (y & z)
    if shared:
        raise OverlappingSets(shared)
    if not x or not y:
        return True
    return nx.is_d_separator(canonical_dag(g).to_networkx(), x, y, z)


def latent_projection(g: Dag, observed: Optional[Iterable[str]] = None) -> Admg:
    """Project out every node not in `observed` (default: the non-latent nodes)."""
    obs = g.order(observed) if observed is not None else g.observed
    hidden = set(g.nodes) - set(obs)
    dg = g.to_networkx()

    def reach(start: str) -> Set[str]:
        found, seen = set(), set()
        stack = list(dg.successors(start))
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            if n in hidden:
                stack.extend(dg.successors(n))
            else:
                found.add(n)
        return found

    directed = {(a, b) for a in obs for b in reach(a)}
    bidirected = set()
    for u in hidden:
        for a, b in combinations(g.order(reach(u)), 2):
            bidirected.add((a, b))
    return Admg(nodes=obs, directed=frozenset(directed), bidirected=frozenset(bidirected))


def surgery_remove_incoming(g: AnyGraph, x: Iterable[str]) -> Admg:
    """Drop directed edges into x and every bidirected edge touching x."""
    g = g if isinstance(g, Admg) else Admg.from_dag(g)
    x = _as_set(g, x)
    return Admg(
        nodes=g.nodes,
        directed=frozenset((a, b) for a, b in g.directed if b not in x),
        bidirected=frozenset((a, b) for a, b in g.bidirected if a not in x and b not in x),
    )


def surgery_remove_outgoing(g: AnyGraph, z: Iterable[str]) -> Admg:
    g = g if isinstance(g, Admg) else Admg.from_dag(g)
    z = _as_set(g, z)
    return Admg(
        nodes=g.nodes,
        directed=frozenset((a, b) for a, b in g.directed if a not in z),
        bidirected=g.bidirected,
    )


def non_ancestors_in(g: AnyGraph, z: Iterable[str], w: Iterable[str]) -> FrozenSet[str]:
    """Nodes of z that are not directed ancestors of any node in w."""
    z, w = _as_set(g, z), _as_set(g, w)
    dg = _digraph(g)
    anc: Set[str] = set()
    for n in w:
        anc |= nx.ancestors(dg, n)
    return frozenset(z - anc)
