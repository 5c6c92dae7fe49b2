from itertools import product
from math import prod
from typing import Callable, Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from abscheck.config import settings
from abscheck.errors import ModelError, NonStochasticRow, PartialMap, ShapeMismatch
from abscheck.models.graph import Dag, NodeId


class Domain(BaseModel):
    """Finite ordered value set of one node; the order is the table indexing contract."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[str, ...]

    @field_validator("values")
    @classmethod
    def _check_values(cls, v):
        if not v:
            raise ValueError("domain must have at least one value")
        if len(set(v)) != len(v):
            raise ValueError(f"duplicate value labels in {list(v)}")
        return v

    @classmethod
    def of(cls, *values) -> "Domain":
        return cls(values=tuple(str(x) for x in values))

    @classmethod
    def range(cls, n: int) -> "Domain":
        return cls(values=tuple(str(i) for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.values)

    def index(self, value: str) -> int:
        try:
            return self.values.index(str(value))
        except ValueError:
            raise ModelError(f"Value '{value}' not in domain {list(self.values)}") from None


UNIT = ()  # empty product: the one-point domain of the monoidal unit


def assignments(domains: Sequence[Domain]) -> Iterator[Tuple[str, ...]]:
    """All joint assignments in mixed-radix order, rightmost fastest."""
    return product(*[d.values for d in domains])


def flat_index(domains: Sequence[Domain], values: Sequence[str]) -> int:
    idx = 0
    for d, v in zip(domains, values):
        idx = idx * d.size + d.index(v)
    return idx


def product_domain(domains: Sequence[Domain]) -> Domain:
    """One domain whose labels are comma-joined tuples of the component labels."""
    return Domain(values=tuple(",".join(t) for t in assignments(domains)))


class Kernel(BaseModel):
    """Row-stochastic table from joint input assignments to joint output assignments.

    Rows and columns are indexed mixed-radix over the declared node order,
    rightmost node fastest.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    inputs: Tuple[NodeId, ...] = ()
    input_domains: Tuple[Domain, ...] = ()
    outputs: Tuple[NodeId, ...] = ()
    output_domains: Tuple[Domain, ...] = ()
    table: np.ndarray

    @model_validator(mode="after")
    def _check(self):
        if len(self.inputs) != len(self.input_domains) or len(self.outputs) != len(self.output_domains):
            raise ShapeMismatch(None, "node lists and domain lists differ in length")
        if len(set(self.inputs)) != len(self.inputs) or len(set(self.outputs)) != len(self.outputs):
            raise ShapeMismatch(None, "repeated node in inputs or outputs")
        expected = (self.n_rows, self.n_cols)
        if self.table.shape != expected:
            raise ShapeMismatch(None, f"table has shape {self.table.shape}, expected {expected}")
        check_stochastic(self.table)
        return self

    # --- shape helpers ---
    @property
    def in_sizes(self) -> Tuple[int, ...]:
        return tuple(d.size for d in self.input_domains)

    @property
    def out_sizes(self) -> Tuple[int, ...]:
        return tuple(d.size for d in self.output_domains)

    @property
    def n_rows(self) -> int:
        return prod(self.in_sizes)

    @property
    def n_cols(self) -> int:
        return prod(self.out_sizes)

    def tensor(self) -> np.ndarray:
        return self.table.reshape(self.in_sizes + self.out_sizes)

    def domain_of(self, node: str) -> Domain:
        if node in self.inputs:
            return self.input_domains[self.inputs.index(node)]
        if node in self.outputs:
            return self.output_domains[self.outputs.index(node)]
        raise ModelError(f"'{node}' is not a wire of this kernel")

    @classmethod
    def from_tensor(cls, inputs, input_domains, outputs, output_domains, tensor: np.ndarray) -> "Kernel":
        rows = prod(d.size for d in input_domains)
        cols = prod(d.size for d in output_domains)
        target = Distribution if not inputs else Kernel
        return target(
            inputs=tuple(inputs),
            input_domains=tuple(input_domains),
            outputs=tuple(outputs),
            output_domains=tuple(output_domains),
            table=np.ascontiguousarray(tensor).reshape(rows, cols),
        )

    @classmethod
    def identity(cls, inputs: Sequence[str], outputs: Sequence[str], domains: Sequence[Domain]) -> "Kernel":
        n = prod(d.size for d in domains)
        return cls(
            inputs=tuple(inputs),
            input_domains=tuple(domains),
            outputs=tuple(outputs),
            output_domains=tuple(domains),
            table=np.eye(n),
        )

    # --- access ---
    def row_index(self, assignment: Mapping[str, str]) -> int:
        missing = [n for n in self.inputs if n not in assignment]
        if missing:
            raise ModelError(f"Input assignment misses {missing}")
        return flat_index(self.input_domains, [assignment[n] for n in self.inputs])

    def row(self, assignment: Mapping[str, str]) -> "Distribution":
        """Value-level do(): the output distribution for one input assignment."""
        i = self.row_index(assignment)
        return Distribution(
            outputs=self.outputs,
            output_domains=self.output_domains,
            table=self.table[i : i + 1].copy(),
        )

    def prob(self, outcome: Mapping[str, str], given: Optional[Mapping[str, str]] = None) -> float:
        i = self.row_index(given or {})
        j = flat_index(self.output_domains, [outcome[n] for n in self.outputs])
        return float(self.table[i, j])

    def input_assignments(self) -> Iterator[Tuple[str, ...]]:
        return assignments(self.input_domains)

    def output_assignments(self) -> Iterator[Tuple[str, ...]]:
        return assignments(self.output_domains)

    def permute(self, inputs: Optional[Sequence[str]] = None, outputs: Optional[Sequence[str]] = None) -> "Kernel":
        """Same kernel with its input/output wires listed in another order."""
        inputs = tuple(inputs) if inputs is not None else self.inputs
        outputs = tuple(outputs) if outputs is not None else self.outputs
        if set(inputs) != set(self.inputs) or len(inputs) != len(self.inputs):
            raise ShapeMismatch(None, f"cannot reorder inputs {self.inputs} as {inputs}")
        if set(outputs) != set(self.outputs) or len(outputs) != len(self.outputs):
            raise ShapeMismatch(None, f"cannot reorder outputs {self.outputs} as {outputs}")
        if inputs == self.inputs and outputs == self.outputs:
            return self
        k = len(self.inputs)
        axes = [self.inputs.index(n) for n in inputs] + [k + self.outputs.index(n) for n in outputs]
        return Kernel.from_tensor(
            inputs,
            [self.domain_of(n) for n in inputs],
            outputs,
            [self.domain_of(n) for n in outputs],
            self.tensor().transpose(axes),
        )

    def max_abs_diff(self, other: "Kernel") -> float:
        other = other.permute(self.inputs, self.outputs)
        if self.table.size == 0:
            return 0.0
        return float(np.max(np.abs(self.table - other.table)))

    def close_to(self, other: "Kernel", tol: Optional[float] = None) -> bool:
        tol = settings.SEMANTIC_TOL if tol is None else tol
        return self.max_abs_diff(other) <= tol


class Distribution(Kernel):
    """A kernel out of the monoidal unit: a single row."""

    @model_validator(mode="after")
    def _single_row(self):
        if self.inputs:
            raise ShapeMismatch(None, "a distribution takes no inputs")
        return self

    def as_vector(self) -> np.ndarray:
        return self.table[0]

    def as_dict(self) -> Dict[Tuple[str, ...], float]:
        return {a: float(p) for a, p in zip(self.output_assignments(), self.table[0])}


def check_stochastic(table: np.ndarray, node: Optional[str] = None, tol: Optional[float] = None):
    tol = settings.VALIDITY_TOL if tol is None else tol
    finite = np.isfinite(table)
    if not finite.all():
        bad = int(np.argwhere(~finite)[0][0])
        raise NonStochasticRow(node, bad, float("nan"))
    if table.size and (np.min(table) < -tol or np.max(table) > 1 + tol):
        bad = int(np.argwhere((table < -tol) | (table > 1 + tol))[0][0])
        raise NonStochasticRow(node, bad, float(table[bad].sum()))
    sums = table.sum(axis=1)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if off.size:
        raise NonStochasticRow(node, int(off[0]), float(sums[off[0]]))


class DeterministicMap(BaseModel):
    """Total function between finite joint domains, stored as an index table."""

    model_config = ConfigDict(frozen=True)

    inputs: Tuple[NodeId, ...]
    input_domains: Tuple[Domain, ...]
    outputs: Tuple[NodeId, ...]
    output_domains: Tuple[Domain, ...]
    index: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self):
        rows = prod(d.size for d in self.input_domains)
        cols = prod(d.size for d in self.output_domains)
        if len(self.index) != rows:
            raise ShapeMismatch(None, f"map has {len(self.index)} entries for {rows} inputs")
        if any(not 0 <= j < cols for j in self.index):
            raise ShapeMismatch(None, "map points outside its codomain")
        return self

    @classmethod
    def from_function(
        cls,
        inputs: Sequence[str],
        input_domains: Sequence[Domain],
        outputs: Sequence[str],
        output_domains: Sequence[Domain],
        fn: Callable[[Tuple[str, ...]], Tuple[str, ...]],
    ) -> "DeterministicMap":
        index = tuple(flat_index(output_domains, fn(a)) for a in assignments(input_domains))
        return cls(
            inputs=tuple(inputs),
            input_domains=tuple(input_domains),
            outputs=tuple(outputs),
            output_domains=tuple(output_domains),
            index=index,
        )

    @classmethod
    def from_mapping(
        cls,
        inputs: Sequence[str],
        input_domains: Sequence[Domain],
        outputs: Sequence[str],
        output_domains: Sequence[Domain],
        mapping: Mapping[Tuple[str, ...], Tuple[str, ...]],
    ) -> "DeterministicMap":
        def lookup(a):
            if a not in mapping:
                raise PartialMap(a)
            return mapping[a]

        return cls.from_function(inputs, input_domains, outputs, output_domains, lookup)

    @classmethod
    def identity(cls, nodes: Sequence[str], domains: Sequence[Domain], outputs: Optional[Sequence[str]] = None):
        n = prod(d.size for d in domains)
        return cls(
            inputs=tuple(nodes),
            input_domains=tuple(domains),
            outputs=tuple(outputs or nodes),
            output_domains=tuple(domains),
            index=tuple(range(n)),
        )

    @property
    def n_cols(self) -> int:
        return prod(d.size for d in self.output_domains)

    def __call__(self, values: Sequence[str]) -> Tuple[str, ...]:
        j = self.index[flat_index(self.input_domains, values)]
        return next(a for i, a in enumerate(assignments(self.output_domains)) if i == j)

    def as_kernel(self) -> Kernel:
        table = np.zeros((len(self.index), self.n_cols))
        table[np.arange(len(self.index)), list(self.index)] = 1.0
        return Kernel(
            inputs=self.inputs,
            input_domains=self.input_domains,
            outputs=self.outputs,
            output_domains=self.output_domains,
            table=table,
        )

    def is_surjective(self) -> bool:
        return len(set(self.index)) == self.n_cols

    def preimage(self, j: int) -> Tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.index) if k == j)


class CausalModel(BaseModel):
    """A DAG (with optional latent nodes), a domain per node and a mechanism per node."""

    model_config = ConfigDict(frozen=True)

    graph: Dag
    domains: Dict[NodeId, Domain]
    mechanisms: Dict[NodeId, Kernel]

    @model_validator(mode="after")
    def _check(self):
        check_model(self)
        return self

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self.graph.nodes

    @property
    def latent(self):
        return self.graph.latent

    def domains_of(self, nodes: Sequence[str]) -> Tuple[Domain, ...]:
        return tuple(self.domains[n] for n in nodes)


def check_model(m: CausalModel):
    """First violated invariant of a causal model, raised as an error."""
    from abscheck.services.graph_service import ordered_parents

    g = m.graph
    for where, keys in (("domains", m.domains), ("mechanisms", m.mechanisms)):
        missing = [n for n in g.nodes if n not in keys]
        extra = [n for n in keys if n not in g.nodes]
        if missing or extra:
            raise ShapeMismatch(None, f"{where} must cover exactly the nodes (missing {missing}, extra {extra})")
    for n in g.nodes:
        k = m.mechanisms[n]
        pas = ordered_parents(g, n)
        if k.outputs != (n,):
            raise ShapeMismatch(n, f"outputs {list(k.outputs)} must be ['{n}']")
        if k.inputs != pas:
            raise ShapeMismatch(n, f"inputs {list(k.inputs)} must be the parents {list(pas)} in declared order")
        if k.output_domains != (m.domains[n],):
            raise ShapeMismatch(n, "output domain differs from the node's domain")
        if k.input_domains != m.domains_of(pas):
            raise ShapeMismatch(n, "input domains differ from the parents' domains")
        expected = (k.n_rows, k.n_cols)
        if k.table.shape != expected:
            raise ShapeMismatch(n, f"table has shape {k.table.shape}, expected {expected}")
        check_stochastic(k.table, node=n)
