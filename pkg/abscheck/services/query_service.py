"""Query signatures: enumeration, the cluster-map action and evaluation."""

from itertools import product
from typing import List, Mapping

from abscheck.errors import InvalidQuery, UnvalidatedClusterMap
from abscheck.models.graph import Dag, MapValidation
from abscheck.models.kernel import CausalModel, Distribution, Kernel
from abscheck.models.query import Query
from abscheck.services import engine


def enumerate_queries(g: Dag) -> List[Query]:
    """Every signature: each node is intervened on, observed, or left out.

    Ordered by the ternary code of the declared node order (0 = neither,
    1 = do, 2 = outcome), rightmost node fastest.
    """
    out = []
    for code in product((0, 1, 2), repeat=len(g.nodes)):
        do = frozenset(n for n, c in zip(g.nodes, code) if c == 1)
        target = frozenset(n for n, c in zip(g.nodes, code) if c == 2)
        out.append(Query(do_set=do, outcome_set=target))
    return out


def map_query(validation: MapValidation, q: Query) -> Query:
    """Expand a high-level query into the low-level one through the clusters.

    Removed low nodes appear in neither set; the low interventional
    computation sums them out.
    """
    if not isinstance(validation, MapValidation):
        raise UnvalidatedClusterMap("map_query needs the result of validate_cluster_map")
    validation.require()
    cm = validation.cluster_map
    unknown = sorted((q.do_set | q.outcome_set) - set(cm.high_nodes))
    if unknown:
        raise InvalidQuery(f"query names nodes {unknown} that are not high-level nodes")
    return Query(
        do_set=frozenset(cm.cluster_of_set(q.do_set)),
        outcome_set=frozenset(cm.cluster_of_set(q.outcome_set)),
    )


def evaluate(m: CausalModel, q: Query) -> Kernel:
    q.on(m.graph)
    return engine.interventional(m, q.do_set, q.outcome_set)


def evaluate_at(m: CausalModel, q: Query, values: Mapping[str, str]) -> Distribution:
    """Value-level do(): the row of the query kernel selected by `values`."""
    missing = sorted(q.do_set - set(values))
    extra = sorted(set(values) - q.do_set)
    if missing or extra:
        raise InvalidQuery(f"do-values must assign exactly the do-set (missing {missing}, extra {extra})")
    return evaluate(m, q).row(values)
