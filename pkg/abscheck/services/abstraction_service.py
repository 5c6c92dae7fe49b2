"""Checking abstractions between two causal models.

Two directions are supported. A cause-side abstraction pushes low-level
values up through a deterministic, surjective family tau and asks the
mechanism squares to commute. An effect-side abstraction maps high values
down through a stochastic family epsilon with a deterministic left inverse.
Every check returns an AbstractionReport; none of them builds the high model
it is checking.
"""

from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from abscheck.config import settings
from abscheck.errors import (
    EpsilonError,
    IncompatibleAbstractions,
    ShapeMismatch,
    TauError,
    ZeroClusterMass,
)
from abscheck.models.abstraction import EpsilonFamily, TauFamily
from abscheck.models.graph import ClusterMap, Dag, MapValidation
from abscheck.models.kernel import CausalModel, DeterministicMap, Kernel, assignments
from abscheck.models.query import Query
from abscheck.models.report import AbstractionReport, SquareResult, Witness
from abscheck.services import engine
from abscheck.services.graph_service import apply_cluster_map, ordered_parents, validate_cluster_map
from abscheck.services.query_service import enumerate_queries, map_query
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)

Scope = Literal["nodes", "subsets"]


# -----------------------------------
# Helpers
# -----------------------------------
def _validated(low: CausalModel, high_graph: Dag, cm: ClusterMap) -> MapValidation:
    return validate_cluster_map(low.graph, high_graph, cm).require()


def cluster_wires(low: CausalModel, cm: ClusterMap, highs: Sequence[str]) -> Tuple[str, ...]:
    """Low nodes behind `highs`: clusters concatenated in the given high order,
    each cluster in low declaration order."""
    out: List[str] = []
    for h in highs:
        out.extend(low.graph.order(cm.cluster(h)))
    return tuple(out)


def low_kernel(low: CausalModel, cm: ClusterMap, do: Sequence[str], target: Sequence[str]) -> Kernel:
    """p_L(cluster(target) | do(cluster(do))) with wires in cluster order."""
    ins, outs = cluster_wires(low, cm, do), cluster_wires(low, cm, target)
    return engine.interventional(low, ins, outs).permute(inputs=ins, outputs=outs)


def high_kernel(high: CausalModel, do: Sequence[str], target: Sequence[str]) -> Kernel:
    return engine.interventional(high, do, target).permute(inputs=tuple(do), outputs=tuple(target))


def tau_kernel(tau: TauFamily, highs: Sequence[str]) -> Kernel:
    """tau_{A1} x ... x tau_{Ak} as one kernel, in the given high order."""
    return engine.tensor_all([tau[h].as_kernel() for h in highs])


def epsilon_kernel(eps: EpsilonFamily, highs: Sequence[str]) -> Kernel:
    return engine.tensor_all([eps[h] for h in highs])


def check_tau(low: CausalModel, cm: ClusterMap, tau: TauFamily, high: Optional[CausalModel] = None):
    """Raise TauError unless every component reads its cluster and writes its high node."""
    extra = sorted(set(tau.components) - set(cm.high_nodes))
    if extra:
        raise TauError(None, f"components for unknown high nodes {extra}")
    for h in cm.high_nodes:
        f = tau[h]
        cluster = low.graph.order(cm.cluster(h))
        if f.inputs != cluster:
            raise TauError(h, f"reads {list(f.inputs)}, expected the cluster {list(cluster)}")
        if f.input_domains != low.domains_of(cluster):
            raise TauError(h, "input domains differ from the low domains of the cluster")
        if high is not None and f.output_domains != (high.domains[h],):
            raise TauError(h, "output domain differs from the high model's domain")


def tau_from_kernel(h: str, k: Kernel) -> DeterministicMap:
    """Turn a kernel given as a tau component into a map; it must be deterministic."""
    if not engine.is_deterministic(k):
        row = int(np.flatnonzero(k.table.max(axis=1) < 1.0 - settings.VALIDITY_TOL)[0])
        raise TauError(h, f"row {row} is not a point mass")
    return engine.as_map(k)


class ReportBuilder:
    """Accumulates square residuals and a bounded list of witnesses."""

    def __init__(self, tol: float, witness_limit: Optional[int]):
        self.tol = tol
        limit = settings.WITNESS_LIMIT if witness_limit is None else witness_limit
        self.limit = limit if limit > 0 else None
        self.squares: List[SquareResult] = []
        self.witnesses: List[Witness] = []
        self.failures: List[str] = []
        self.notes: List[str] = []
        self.skipped = 0

    def room(self) -> bool:
        return self.limit is None or len(self.witnesses) < self.limit

    def compare(
        self,
        name: str,
        left: Kernel,
        right: Kernel,
        given_image: Optional[Sequence[int]] = None,
        mask: Optional[np.ndarray] = None,
        skipped: int = 0,
    ) -> float:
        """Record max |left - right| over entries where `mask` holds.

        `given_image` maps each input row to an abstract row; it is used to
        point at a second input with the same image but a different left row.
        """
        right = right.permute(left.inputs, left.outputs)
        diff = np.abs(left.table - right.table)
        if mask is not None:
            diff = np.where(mask, diff, 0.0)
        residual = float(diff.max()) if diff.size else 0.0
        self.squares.append(SquareResult(name=name, residual=residual, skipped=skipped))
        self.skipped += skipped
        logger.debug("square %s: residual %.3e", name, residual)
        if residual > self.tol and self.room():
            self._witness(name, left, right, diff, given_image)
        return residual

    def _witness(self, name, left: Kernel, right: Kernel, diff, given_image):
        ins = list(left.input_assignments())
        outs = list(left.output_assignments())
        for i, j in np.argwhere(diff > self.tol):
            if not self.room():
                return
            conflict = None
            if given_image is not None:
                for i2 in range(len(ins)):
                    if (
                        i2 != i
                        and given_image[i2] == given_image[i]
                        and np.max(np.abs(left.table[i2] - left.table[i])) > self.tol
                    ):
                        conflict = dict(zip(left.inputs, ins[i2]))
                        break
            self.witnesses.append(
                Witness(
                    where=name,
                    given=dict(zip(left.inputs, ins[i])),
                    outcome=dict(zip(left.outputs, outs[j])),
                    left=float(left.table[i, j]),
                    right=float(right.table[i, j]),
                    conflicting_given=conflict,
                )
            )

    def report(self, check: str) -> AbstractionReport:
        rep = AbstractionReport(
            check=check,
            tolerance=self.tol,
            squares=tuple(self.squares),
            witnesses=tuple(self.witnesses),
            skipped=self.skipped,
            notes=tuple(self.notes),
            failures=tuple(self.failures),
        )
        logger.info("%s: %s (max residual %.3e)", check, "pass" if rep.passed else "FAIL", rep.max_residual)
        return rep


def _image(tau: TauFamily, highs: Sequence[str]) -> Tuple[int, ...]:
    """Row index of tau(highs) for every joint low row."""
    return tuple(int(j) for j in tau_kernel(tau, highs).table.argmax(axis=1))


# -----------------------------------
# Cause-side (tau) checks
# -----------------------------------
def check_naturality(
    low: CausalModel,
    high: CausalModel,
    cm: ClusterMap,
    tau: TauFamily,
    tol: Optional[float] = None,
    witness_limit: Optional[int] = None,
) -> AbstractionReport:
    """For every high node A, compare
    p_L(cluster A | do(cluster pa(A))) then tau_A
    with
    tau_pa then p_H(A | pa(A)).
    """
    tol = settings.SEMANTIC_TOL if tol is None else tol
    _validated(low, high.graph, cm)
    check_tau(low, cm, tau, high)

    out = ReportBuilder(tol, witness_limit)
    for a in high.nodes:
        pa = ordered_parents(high.graph, a)
        left = engine.compose(low_kernel(low, cm, pa, (a,)), tau[a].as_kernel())
        right = engine.compose(tau_kernel(tau, pa), high.mechanisms[a])
        out.compare(a, left, right, given_image=_image(tau, pa))
    return out.report("naturality")


def _query_pairs(high: CausalModel, scope: Scope) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
    g = high.graph
    if scope == "nodes":
        return [((x,), (y,)) for x in g.nodes for y in g.nodes if x != y]
    if scope == "subsets":
        return [
            (g.order(q.do_set), g.order(q.outcome_set))
            for q in enumerate_queries(g)
            if q.outcome_set
        ]
    raise ValueError(f"unknown scope {scope!r}")


def _query_name(do: Sequence[str], target: Sequence[str]) -> str:
    return str(Query(do_set=frozenset(do), outcome_set=frozenset(target)))


def check_interventional_consistency(
    low: CausalModel,
    high: CausalModel,
    cm: ClusterMap,
    tau: TauFamily,
    scope: Scope = "subsets",
    tol: Optional[float] = None,
    witness_limit: Optional[int] = None,
) -> AbstractionReport:
    """p_L(cluster Y | do(a)) pushed through tau_Y against p_H(Y | do(tau_X(a))).

    scope "nodes" compares single high nodes X != Y; scope "subsets" every
    disjoint pair with Y nonempty, X possibly empty.
    """
    tol = settings.SEMANTIC_TOL if tol is None else tol
    validation = _validated(low, high.graph, cm)
    check_tau(low, cm, tau, high)

    out = ReportBuilder(tol, witness_limit)
    for do, target in _query_pairs(high, scope):
        low_q = map_query(validation, Query(do_set=frozenset(do), outcome_set=frozenset(target)))
        low_k = engine.interventional(low, low_q.do_set, low_q.outcome_set).permute(
            inputs=cluster_wires(low, cm, do), outputs=cluster_wires(low, cm, target)
        )
        left = engine.compose(low_k, tau_kernel(tau, target))
        right = engine.compose(tau_kernel(tau, do), high_kernel(high, do, target))
        out.compare(_query_name(do, target), left, right, given_image=_image(tau, do))
    return out.report(f"consistency[{scope}]")


# -----------------------------------
# Epsilon construction
# -----------------------------------
def _cluster_conditionals(
    low: CausalModel, cm: ClusterMap, tau: TauFamily, h: str
) -> Tuple[np.ndarray, np.ndarray]:
    """Rows p_L(a | tau_h(a) = v) per high value v, and which v carry mass."""
    f = tau[h]
    p = engine.observational(low, f.inputs).permute(outputs=f.inputs).as_vector()
    table = np.zeros((f.n_cols, len(p)))
    positive = np.zeros(f.n_cols, dtype=bool)
    for j in range(f.n_cols):
        pre = list(f.preimage(j))
        mass = float(p[pre].sum())
        if mass > settings.ZERO_MASS_TOL:
            table[j, pre] = p[pre] / mass
            positive[j] = True
    return table, positive


def epsilon_from_tau(low: CausalModel, cm: ClusterMap, tau: TauFamily) -> EpsilonFamily:
    """eps_A(a | v) = p_L(a | tau_A(a) = v) under the low observational law."""
    check_tau(low, cm, tau)
    comps: Dict[str, Kernel] = {}
    for h in cm.high_nodes:
        f = tau[h]
        table, positive = _cluster_conditionals(low, cm, tau, h)
        if not positive.all():
            value = f.output_domains[0].values[int(np.flatnonzero(~positive)[0])]
            raise ZeroClusterMass(h, value)
        comps[h] = Kernel(
            inputs=(h,),
            input_domains=f.output_domains,
            outputs=f.inputs,
            output_domains=f.input_domains,
            table=table,
        )
    return EpsilonFamily(components=comps)


def check_right_inverse(tau: TauFamily, eps: EpsilonFamily, tol: Optional[float] = None) -> bool:
    """tau_A after eps_A is the identity on every high domain."""
    tol = settings.VALIDITY_TOL if tol is None else tol
    if set(tau.components) != set(eps.components):
        return False
    for h in tau.components:
        try:
            roundtrip = engine.compose(eps[h], tau[h].as_kernel())
        except ShapeMismatch:
            return False
        ident = np.eye(roundtrip.n_rows)
        if roundtrip.table.shape != ident.shape or np.max(np.abs(roundtrip.table - ident)) > tol:
            logger.debug("tau_%s o eps_%s is not the identity", h, h)
            return False
    return True


def left_inverse(eps: EpsilonFamily, tol: Optional[float] = None) -> TauFamily:
    """The deterministic tau with tau o eps = id.

    It exists iff the rows of each eps component have disjoint supports. Low
    values outside every support map to the first high value.
    """
    tol = settings.VALIDITY_TOL if tol is None else tol
    comps = {}
    for h, k in eps.components.items():
        support = k.table > tol
        owners = support.sum(axis=0)
        shared = np.flatnonzero(owners > 1)
        if shared.size:
            label = list(k.output_assignments())[int(shared[0])]
            raise EpsilonError(h, f"no deterministic left inverse: low value {label} is reached from several high values")
        index = tuple(int(np.argmax(support[:, c])) for c in range(k.n_cols))
        comps[h] = DeterministicMap(
            inputs=k.outputs,
            input_domains=k.output_domains,
            outputs=k.inputs,
            output_domains=k.input_domains,
            index=index,
        )
    return TauFamily(components=comps)


# -----------------------------------
# Effect-side (epsilon) checks
# -----------------------------------
def _align_epsilon(low: CausalModel, cm: ClusterMap, eps: EpsilonFamily, high: CausalModel) -> EpsilonFamily:
    comps = {}
    for h in cm.high_nodes:
        k = eps[h]
        cluster = low.graph.order(cm.cluster(h))
        if set(k.outputs) != set(cluster) or len(k.outputs) != len(cluster):
            raise EpsilonError(h, f"writes {list(k.outputs)}, expected the cluster {list(cluster)}")
        k = k.permute(outputs=cluster)
        if k.output_domains != low.domains_of(cluster):
            raise EpsilonError(h, "output domains differ from the low domains of the cluster")
        if k.input_domains != (high.domains[h],):
            raise EpsilonError(h, "input domain differs from the high model's domain")
        comps[h] = k
    return EpsilonFamily(components=comps)


def check_effect_focused(
    low: CausalModel,
    high: CausalModel,
    cm: ClusterMap,
    eps: EpsilonFamily,
    tol: Optional[float] = None,
    witness_limit: Optional[int] = None,
) -> AbstractionReport:
    """Reversed squares: p_H(A | pa) then eps_A against eps_pa then p_L(cluster A | do(cluster pa)).

    Also checks p_H(A) then eps_A against p_L(cluster A), and that eps_A is
    the low law conditioned on the cluster wherever that cluster has mass.
    """
    tol = settings.SEMANTIC_TOL if tol is None else tol
    _validated(low, high.graph, cm)
    eps = _align_epsilon(low, cm, eps, high)
    tau = left_inverse(eps)

    out = ReportBuilder(tol, witness_limit)
    for a in high.nodes:
        pa = ordered_parents(high.graph, a)
        left = engine.compose(high.mechanisms[a], eps[a])
        right = engine.compose(epsilon_kernel(eps, pa), low_kernel(low, cm, pa, (a,)))
        out.compare(a, left, right)

    for a in high.nodes:
        left = engine.compose(engine.observational(high, (a,)), eps[a])
        right = engine.observational(low, eps[a].outputs).permute(outputs=eps[a].outputs)
        out.compare(f"{a} (marginal)", left, right)

    for a in high.nodes:
        table, positive = _cluster_conditionals(low, cm, tau, a)
        values = eps[a].input_domains[0].values
        for j in np.flatnonzero(positive):
            gap = float(np.max(np.abs(eps[a].table[j] - table[j])))
            if gap > tol:
                out.failures.append(
                    f"eps_{a} row {values[j]} differs from p({a} cluster | {a}={values[j]}) by {gap:.3e}"
                )
        for j in np.flatnonzero(~positive):
            out.notes.append(f"{a}={values[j]} has zero low mass; its eps row is unconstrained")
    return out.report("effect-focused")


def check_sufficient_statistic(
    low: CausalModel,
    cm: ClusterMap,
    tau: TauFamily,
    tol: Optional[float] = None,
    witness_limit: Optional[int] = None,
) -> AbstractionReport:
    """p_L(a | b~) = eps_A(a | tau_A(a)) p_L(tau_A(a) | b~) for every high node A.

    p_L(a | b~) averages p_L(a | do(b)) over the low parent values b with
    weights eps_pa(b | b~). Rows and columns touching a zero-mass cluster
    value are skipped and counted.
    """
    tol = settings.SEMANTIC_TOL if tol is None else tol
    validation = apply_cluster_map(low.graph, cm).require()
    high_graph = validation.abstracted
    check_tau(low, cm, tau)

    conditionals = {h: _cluster_conditionals(low, cm, tau, h) for h in cm.high_nodes}
    out = ReportBuilder(tol, witness_limit)
    for a in high_graph.nodes:
        pa = ordered_parents(high_graph, a)
        e_pa, pos_pa = np.ones((1, 1)), np.ones(1, dtype=bool)
        for h in pa:
            t, pos = conditionals[h]
            e_pa, pos_pa = np.kron(e_pa, t), np.kron(pos_pa, pos).astype(bool)
        k = low_kernel(low, cm, pa, (a,))
        lhs = e_pa @ k.table
        f = tau[a]
        t_a, pos_a = conditionals[a]
        coarse = lhs @ f.as_kernel().table
        idx = np.asarray(f.index)
        rhs = t_a[idx, np.arange(len(idx))][None, :] * coarse[:, idx]

        mask = np.outer(pos_pa, pos_a[idx])
        skipped = int(mask.size - mask.sum())
        in_doms = tuple(tau.high_domain(h) for h in pa)
        def as_kernel(t, pa=pa, in_doms=in_doms, k=k):
            # zero-mass rows are all zeros, so skip row validation
            return Kernel.model_construct(
                inputs=tuple(pa), input_domains=in_doms, outputs=k.outputs, output_domains=k.output_domains, table=t
            )

        out.compare(a, as_kernel(lhs), as_kernel(rhs), mask=mask, skipped=skipped)
    return out.report("sufficient-statistic")


# -----------------------------------
# Composition and factorization
# -----------------------------------
def compose_abstractions(
    cm12: ClusterMap, tau12: TauFamily, cm23: ClusterMap, tau23: TauFamily
) -> Tuple[ClusterMap, TauFamily]:
    """Flatten clusters of clusters and compose tau componentwise."""
    if set(cm12.high_nodes) != set(cm23.low_nodes):
        raise IncompatibleAbstractions(
            f"middle nodes differ: {sorted(cm12.high_nodes)} vs {sorted(cm23.low_nodes)}"
        )
    assignment = {}
    for n in cm12.low_nodes:
        mid = cm12.assignment[n]
        assignment[n] = None if mid is None else cm23.assignment[mid]
    cm13 = ClusterMap(low_nodes=cm12.low_nodes, high_nodes=cm23.high_nodes, assignment=assignment)

    comps = {}
    for c in cm23.high_nodes:
        outer = tau23[c]
        for m, dom in zip(outer.inputs, outer.input_domains):
            if tau12[m].output_domains != (dom,):
                raise IncompatibleAbstractions(f"domain of middle node '{m}' differs between the two tau families")
        wires = cm13.cluster(c)
        domains = []
        for n in wires:
            inner = tau12[cm12.assignment[n]]
            domains.append(inner.input_domains[inner.inputs.index(n)])

        def fn(values, outer=outer, wires=wires):
            at = dict(zip(wires, values))
            mids = [tau12[m](tuple(at[n] for n in tau12[m].inputs))[0] for m in outer.inputs]
            return outer(tuple(mids))

        comps[c] = DeterministicMap.from_function(wires, domains, (c,), outer.output_domains, fn)
    return cm13, TauFamily(components=comps)


def check_factorization_of_tau(tau: TauFamily, joint_tau: DeterministicMap) -> bool:
    """True iff `joint_tau` is the product of the components, pointwise."""
    product = tau_kernel(tau, list(tau.components))
    joint = joint_tau.as_kernel()
    if set(joint.inputs) != set(product.inputs) or set(joint.outputs) != set(product.outputs):
        raise TauError(None, "joint map and components act on different nodes")
    return product.max_abs_diff(joint) <= settings.VALIDITY_TOL


def require_factorizing(tau: TauFamily, joint_tau: DeterministicMap):
    if not check_factorization_of_tau(tau, joint_tau):
        product = engine.as_map(tau_kernel(tau, list(tau.components)).permute(joint_tau.inputs, joint_tau.outputs))
        for row, values in enumerate(assignments(joint_tau.input_domains)):
            if product.index[row] != joint_tau.index[row]:
                raise TauError(
                    None,
                    f"joint map does not factorize into components: at {dict(zip(joint_tau.inputs, values))} "
                    f"it gives {joint_tau(values)} but the components give {product(values)}",
                )


# -----------------------------------
# Derived high models (fixture helpers)
# -----------------------------------
def _section(tau: TauFamily, h: str) -> Kernel:
    """Deterministic kernel picking the first preimage of every high value."""
    f = tau[h]
    return DeterministicMap(
        inputs=(h,),
        input_domains=f.output_domains,
        outputs=f.inputs,
        output_domains=f.input_domains,
        index=tuple(f.preimage(j)[0] for j in range(f.n_cols)),
    ).as_kernel()


def derive_high_model(
    low: CausalModel, cm: ClusterMap, tau: TauFamily, high_graph: Optional[Dag] = None
) -> CausalModel:
    """Candidate high model: low mechanisms pushed through tau, parents read
    through the first preimage of each high value.

    Only a candidate; pass it to check_naturality like any other high model.
    """
    if high_graph is None:
        high_graph = apply_cluster_map(low.graph, cm).require().abstracted
    check_tau(low, cm, tau)
    mechanisms = {}
    for a in high_graph.nodes:
        pa = ordered_parents(high_graph, a)
        section = engine.tensor_all([_section(tau, h) for h in pa])
        k = engine.compose(engine.compose(section, low_kernel(low, cm, pa, (a,))), tau[a].as_kernel())
        mechanisms[a] = k
    domains = {h: tau.high_domain(h) for h in high_graph.nodes}
    return CausalModel(graph=high_graph, domains=domains, mechanisms=mechanisms)


def derive_effect_focused_model(
    low: CausalModel, cm: ClusterMap, eps: EpsilonFamily, high_graph: Optional[Dag] = None
) -> CausalModel:
    """Candidate high model for an effect-side abstraction: eps_pa, then the
    low interventional kernel, then the left inverse of eps_A."""
    if high_graph is None:
        high_graph = apply_cluster_map(low.graph, cm).require().abstracted
    tau = left_inverse(eps)
    mechanisms = {}
    for a in high_graph.nodes:
        pa = ordered_parents(high_graph, a)
        lifted = engine.compose(epsilon_kernel(eps, pa), low_kernel(low, cm, pa, (a,)))
        mechanisms[a] = engine.compose(lifted, tau[a].as_kernel())
    domains = {h: tau.high_domain(h) for h in high_graph.nodes}
    return CausalModel(graph=high_graph, domains=domains, mechanisms=mechanisms)
