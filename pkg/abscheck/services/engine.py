"""Finite discrete semantics of causal models.

Everything is dense numpy tables. Interventional kernels come from the
truncated factorization evaluated with a single `np.einsum` call, so the
summation order is fixed by the node order and results are reproducible.
"""

from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from abscheck.config import settings
from abscheck.errors import InvalidQuery, ModelError, OverlappingSets, ShapeMismatch, ZeroEvidence
from abscheck.models.kernel import (
    CausalModel,
    DeterministicMap,
    Distribution,
    Domain,
    Kernel,
    check_model,
)
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)


def validate_model(m: CausalModel) -> None:
    """Re-check every invariant of `m`; raises the first violation."""
    check_model(m)


def _ordered(m: CausalModel, nodes: Iterable[str], what: str):
    nodes = set(nodes)
    unknown = sorted(nodes - set(m.nodes))
    if unknown:
        raise InvalidQuery(f"{what} names unknown nodes {unknown}")
    return m.graph.order(nodes)


def interventional(m: CausalModel, do_set: Iterable[str], outcome_set: Iterable[str]) -> Kernel:
    """p(outcome | do(do_set)) by truncated factorization.

    Mechanisms of intervened nodes are dropped, their values are read from the
    kernel input and every other node, latents included, is summed out.
    """
    do = _ordered(m, do_set, "do-set")
    out = _ordered(m, outcome_set, "outcome set")
    shared = set(do) & set(out)
    if shared:
        raise InvalidQuery(f"do-set and outcome set overlap on {sorted(shared)}")

    axis = {n: i for i, n in enumerate(m.nodes)}
    operands = []
    for n in m.nodes:
        size = m.domains[n].size
        if n in do:
            # intervened: a free index fixed by the kernel input
            operands += [np.ones(size), [axis[n]]]
            continue
        k = m.mechanisms[n]
        operands += [k.tensor(), [axis[p] for p in k.inputs] + [axis[n]]]
    result = np.einsum(*operands, [axis[n] for n in do] + [axis[n] for n in out])

    logger.debug("interventional do=%s out=%s", list(do), list(out))
    return Kernel.from_tensor(do, m.domains_of(do), out, m.domains_of(out), result)


def joint(m: CausalModel) -> Distribution:
    """Joint over all nodes, latents included, in declared order."""
    return interventional(m, (), m.nodes)


def observational(m: CausalModel, nodes: Iterable[str]) -> Distribution:
    return interventional(m, (), nodes)


def condition(d: Distribution, evidence: Mapping[str, str], tol: Optional[float] = None) -> Distribution:
    """Bayes conditioning on a value assignment of some of d's nodes."""
    tol = settings.ZERO_MASS_TOL if tol is None else tol
    unknown = sorted(set(evidence) - set(d.outputs))
    if unknown:
        raise InvalidQuery(f"evidence on nodes {unknown} outside the distribution")
    t = d.table.reshape(d.out_sizes)
    index = tuple(
        d.output_domains[i].index(evidence[n]) if n in evidence else slice(None)
        for i, n in enumerate(d.outputs)
    )
    sub = t[index]
    mass = float(np.sum(sub))
    if mass <= tol:
        raise ZeroEvidence(evidence, mass)
    keep = [i for i, n in enumerate(d.outputs) if n not in evidence]
    return Kernel.from_tensor(
        (), (), [d.outputs[i] for i in keep], [d.output_domains[i] for i in keep], np.asarray(sub) / mass
    )


def marginalize(d: Distribution, keep: Iterable[str]) -> Distribution:
    keep = set(keep)
    unknown = sorted(keep - set(d.outputs))
    if unknown:
        raise InvalidQuery(f"cannot keep nodes {unknown} outside the distribution")
    drop = tuple(i for i, n in enumerate(d.outputs) if n not in keep)
    kept = [i for i, n in enumerate(d.outputs) if n in keep]
    t = d.table.reshape(d.out_sizes).sum(axis=drop)
    return Kernel.from_tensor(
        (), (), [d.outputs[i] for i in kept], [d.output_domains[i] for i in kept], t
    )


def compose(first: Kernel, second: Kernel) -> Kernel:
    """Sequential composition: first's outputs feed second's inputs."""
    if set(first.outputs) != set(second.inputs) or len(first.outputs) != len(second.inputs):
        raise ShapeMismatch(None, f"cannot feed {list(first.outputs)} into {list(second.inputs)}")
    second = second.permute(inputs=first.outputs)
    if second.input_domains != first.output_domains:
        raise ShapeMismatch(None, "domains differ on the composed wires")
    return Kernel.from_tensor(
        first.inputs,
        first.input_domains,
        second.outputs,
        second.output_domains,
        first.table @ second.table,
    )


def tensor(left: Kernel, right: Kernel) -> Kernel:
    """Parallel composition; inputs and outputs are concatenated left then right."""
    shared = (set(left.inputs) & set(right.inputs)) | (set(left.outputs) & set(right.outputs))
    if shared:
        raise OverlappingSets(shared)
    return Kernel.from_tensor(
        left.inputs + right.inputs,
        left.input_domains + right.input_domains,
        left.outputs + right.outputs,
        left.output_domains + right.output_domains,
        np.kron(left.table, right.table),
    )


def tensor_all(kernels: Sequence[Kernel]) -> Kernel:
    out = Distribution(table=np.ones((1, 1)))
    for k in kernels:
        out = tensor(out, k)
    return out


def push_forward(d: Kernel, f: DeterministicMap) -> Kernel:
    """Image of d's outputs under f; works row by row for kernels too."""
    if set(d.outputs) != set(f.inputs):
        raise ShapeMismatch(None, f"map reads {list(f.inputs)} but the distribution is over {list(d.outputs)}")
    return compose(d, f.as_kernel())


def is_deterministic(k: Kernel, tol: Optional[float] = None) -> bool:
    tol = settings.VALIDITY_TOL if tol is None else tol
    if k.n_rows == 0:
        return True
    return bool(np.all(k.table.max(axis=1) >= 1.0 - tol))


def as_map(k: Kernel, tol: Optional[float] = None) -> DeterministicMap:
    """The function underlying a deterministic kernel."""
    if not is_deterministic(k, tol):
        raise ModelError("kernel is not deterministic")
    return DeterministicMap(
        inputs=k.inputs,
        input_domains=k.input_domains,
        outputs=k.outputs,
        output_domains=k.output_domains,
        index=tuple(int(j) for j in k.table.argmax(axis=1)),
    )


def uniform(nodes: Sequence[str], domains: Sequence[Domain]) -> Distribution:
    n = int(np.prod([d.size for d in domains], dtype=int))
    return Kernel.from_tensor((), (), nodes, domains, np.full(n, 1.0 / n))
