"""Do-calculus on cluster ADMGs, checked by brute force on the low-level model.

The high-level graph is obtained by merging clusters of endogenous nodes in
the low DAG (latents kept as they are) and projecting the latents out. A rule
licensed on that ADMG is then verified numerically: both sides of the rule's
equality are computed on the low model for every value of the clusters.
"""

from math import prod
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from abscheck.config import settings
from abscheck.errors import ClusterMapError, InconclusiveAllZeroMass, SizeLimitExceeded, ZeroEvidence
from abscheck.models.graph import Admg, ClusterMap, Dag
from abscheck.models.kernel import CausalModel, Distribution, Kernel, assignments, product_domain
from abscheck.models.query import RuleQuery
from abscheck.models.report import AbstractionReport, RuleApplicability, RuleReport, RuleRow
from abscheck.services import engine
from abscheck.services.abstraction_service import ReportBuilder
from abscheck.services.graph_service import (
    apply_cluster_map,
    d_separated,
    latent_projection,
    non_ancestors_in,
    ordered_parents,
    surgery_remove_incoming,
    surgery_remove_outgoing,
)
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)


def _fmt(nodes: Iterable[str], g=None) -> str:
    nodes = g.order(nodes) if g is not None else sorted(nodes)
    return "{" + ",".join(nodes) + "}"


# -----------------------------------
# Rules on the high-level ADMG
# -----------------------------------
def rule_applicable(h: Admg, rq: RuleQuery) -> RuleApplicability:
    """Surgery for the rule, then (Y indep Z | X, W) on the surgered graph.

    Rule 1 cuts edges into X; rule 2 also cuts edges out of Z; rule 3 cuts
    edges into X and into Z(W), the nodes of Z that are not ancestors of W
    once edges into X are gone.
    """
    rq.on(h)
    cut = surgery_remove_incoming(h, rq.x)
    label = f"H[in:{_fmt(rq.x, h)}"
    if rq.rule == 2:
        cut = surgery_remove_outgoing(cut, rq.z)
        label += f", out:{_fmt(rq.z, h)}"
    elif rq.rule == 3:
        zw = non_ancestors_in(cut, rq.z, rq.w)
        cut = surgery_remove_incoming(cut, zw)
        label += f", in:{_fmt(zw, h)}"
    label += "]"

    ok = d_separated(cut, rq.y, rq.z, rq.x | rq.w)
    statement = f"{_fmt(rq.y, h)} _||_ {_fmt(rq.z, h)} | {_fmt(rq.x | rq.w, h)} in {label}"
    logger.debug("rule %d: %s -> %s", rq.rule, statement, ok)
    return RuleApplicability(rule=rq.rule, applicable=ok, statement=statement, surgered=str(cut))


def rule_sides(rq: RuleQuery) -> Tuple[str, str]:
    y, x, z, w = (",".join(sorted(s)) for s in (rq.y, rq.x, rq.z, rq.w))

    def term(do: List[str], given: List[str]) -> str:
        parts = [f"do({d})" for d in do if d] + [g for g in given if g]
        return f"p({y} | {', '.join(parts)})" if parts else f"p({y})"

    if rq.rule == 1:
        return term([x], [z, w]), term([x], [w])
    if rq.rule == 2:
        return term([x, z], [w]), term([x], [z, w])
    return term([x, z], [w]), term([x], [w])


# -----------------------------------
# Cluster ADMG
# -----------------------------------
def extend_over_latents(low_graph: Dag, cm: ClusterMap) -> ClusterMap:
    """The cluster map on the full DAG: every latent is its own cluster."""
    if set(cm.low_nodes) != set(low_graph.observed):
        raise ClusterMapError("Cluster map must cover exactly the endogenous (non-latent) nodes")
    clash = sorted(set(cm.high_nodes) & low_graph.latent)
    if clash:
        raise ClusterMapError(f"High node names {clash} collide with latent nodes")
    latents = [u for u in low_graph.nodes if u in low_graph.latent]
    assignment = {**cm.assignment, **{u: u for u in latents}}
    return ClusterMap(low_nodes=low_graph.nodes, high_nodes=cm.high_nodes + tuple(latents), assignment=assignment)


def clustered_dag(low_graph: Dag, cm: ClusterMap) -> Dag:
    """Merge the clusters of `cm` in the low DAG, keeping latents; raises if invalid."""
    return apply_cluster_map(low_graph, extend_over_latents(low_graph, cm)).require().abstracted


def high_admg_from_cluster_map(low_graph: Dag, cm: ClusterMap) -> Admg:
    return latent_projection(clustered_dag(low_graph, cm), observed=cm.high_nodes)


def _wires(low: CausalModel, cm: ClusterMap, highs: Sequence[str]) -> Tuple[str, ...]:
    out: List[str] = []
    for h in highs:
        out.extend(low.graph.order(cm.cluster(h)))
    return tuple(out)


def _check_sizes(low: CausalModel, cm: ClusterMap, highs: Iterable[str]):
    for h in highs:
        size = prod(low.domains[n].size for n in cm.cluster(h))
        if size > settings.MAX_CLUSTER_VALUES:
            raise SizeLimitExceeded(f"cluster '{h}'", size, settings.MAX_CLUSTER_VALUES)


def clustered_model(low: CausalModel, cm: ClusterMap) -> CausalModel:
    """Causal model over the clustered DAG with latents.

    A cluster's values are the joint values of its members (labels joined by
    commas); its mechanism is the low interventional kernel of the cluster
    given its clustered parents and latent parents.
    """
    full = extend_over_latents(low.graph, cm)
    g = clustered_dag(low.graph, cm)
    _check_sizes(low, full, g.nodes)

    domains = {h: product_domain(low.domains_of(_wires(low, full, [h]))) for h in g.nodes}
    mechanisms = {}
    for h in g.nodes:
        pa = ordered_parents(g, h)
        ins, outs = _wires(low, full, pa), _wires(low, full, [h])
        k = engine.interventional(low, ins, outs).permute(inputs=ins, outputs=outs)
        mechanisms[h] = Kernel(
            inputs=pa,
            input_domains=tuple(domains[p] for p in pa),
            outputs=(h,),
            output_domains=(domains[h],),
            table=k.table,
        )
    return CausalModel(graph=g, domains=domains, mechanisms=mechanisms)


def check_clustered_factorization(
    low: CausalModel, cm: ClusterMap, tol: Optional[float] = None
) -> AbstractionReport:
    """The clustered model reproduces the low model on every single-cluster
    intervention (and the observational law) over the endogenous clusters."""
    tol = settings.SEMANTIC_TOL if tol is None else tol
    model = clustered_model(low, cm)
    full = extend_over_latents(low.graph, cm)
    highs = model.graph.order(cm.high_nodes)

    out = ReportBuilder(tol, witness_limit=None)
    for do in [()] + [(a,) for a in highs]:
        rest = tuple(h for h in highs if h not in do)
        clustered = engine.interventional(model, do, rest).permute(inputs=do, outputs=rest)
        ins, outs = _wires(low, full, do), _wires(low, full, rest)
        k = engine.interventional(low, ins, outs).permute(inputs=ins, outputs=outs)
        relabelled = Kernel.from_tensor(do, clustered.input_domains, rest, clustered.output_domains, k.table)
        name = f"do({do[0]})" if do else "observational"
        out.compare(name, clustered, relabelled)
    return out.report("clustered-factorization")


# -----------------------------------
# Numeric verification of a rule
# -----------------------------------
def _side(
    low: CausalModel, do: Sequence[str], given: Sequence[str], y: Sequence[str]
) -> Callable[[Dict[str, str]], Distribution]:
    """p(y | do(do), given) as a function of an assignment covering do and given."""
    kernel = engine.interventional(low, do, tuple(y) + tuple(given))

    def at(values: Dict[str, str]) -> Distribution:
        d = kernel.row({n: values[n] for n in kernel.inputs})
        d = engine.condition(d, {n: values[n] for n in given}) if given else d
        return d.permute(outputs=tuple(y))

    return at


def verify_rule_on_low(
    low: CausalModel, cm: ClusterMap, rq: RuleQuery, tol: Optional[float] = None
) -> RuleReport:
    """Compute both sides of the rule on the low model for every joint value of
    the X, Z and W clusters; zero-mass conditioning values are skipped."""
    tol = settings.SEMANTIC_TOL if tol is None else tol
    h = high_admg_from_cluster_map(low.graph, cm)
    verdict = rule_applicable(h, rq)
    _check_sizes(low, cm, rq.nodes())

    x, y, z, w = (_wires(low, cm, h.order(s)) for s in (rq.x, rq.y, rq.z, rq.w))
    if rq.rule == 1:
        left, right = _side(low, x, z + w, y), _side(low, x, w, y)
    elif rq.rule == 2:
        left, right = _side(low, x + z, w, y), _side(low, x, z + w, y)
    else:
        left, right = _side(low, x + z, w, y), _side(low, x, w, y)

    free = x + z + w
    rows: List[RuleRow] = []
    for values in assignments(low.domains_of(free)):
        at = dict(zip(free, values))
        try:
            residual = left(at).max_abs_diff(right(at))
        except ZeroEvidence:
            residual = None
        rows.append(RuleRow(assignment=at, residual=residual))

    if all(r.residual is None for r in rows):
        raise InconclusiveAllZeroMass(len(rows))

    lhs, rhs = rule_sides(rq)
    report = RuleReport(
        rule=rq.rule,
        applicable=verdict.applicable,
        statement=verdict.statement,
        high_graph=str(h),
        left=lhs,
        right=rhs,
        tolerance=tol,
        rows=tuple(rows),
    )
    logger.info(
        "rule %d (%s): max residual %.3e over %d assignments, %d skipped",
        rq.rule,
        "applicable" if verdict.applicable else "not applicable",
        report.max_residual,
        len(rows),
        report.skipped,
    )
    return report
