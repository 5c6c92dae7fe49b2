"""Exception hierarchy for the verification toolkit.

Every error raised on purpose by the library derives from AbsCheckError so the
CLI can map it to exit status 2 in one place.
"""

from typing import Iterable, Optional


class AbsCheckError(Exception):
    """Base class for all toolkit errors."""


# --- Graph ---

class UnknownNode(AbsCheckError):
    def __init__(self, node: str, where: str = "graph"):
        self.node = node
        super().__init__(f"Unknown node '{node}' in {where}")


class GraphError(AbsCheckError):
    pass


class CycleError(GraphError):
    def __init__(self, cycle: Iterable[str]):
        self.cycle = list(cycle)
        super().__init__("Graph contains the directed cycle " + "->".join(self.cycle))


class MergeCreatesCycle(GraphError):
    def __init__(self, a: str, b: str, cycle: Iterable[str]):
        self.a, self.b = a, b
        self.cycle = list(cycle)
        super().__init__(f"Merging '{a}' and '{b}' creates the cycle " + "->".join(self.cycle))


class IsConfounder(GraphError):
    def __init__(self, node: str, children: Iterable[str]):
        self.node = node
        self.children = sorted(children)
        super().__init__(
            f"Cannot delete '{node}': it is a confounder of {', '.join(self.children)}"
        )


class DuplicateNode(GraphError):
    def __init__(self, node: str):
        self.node = node
        super().__init__(f"Node '{node}' already exists")


class OverlappingSets(AbsCheckError):
    def __init__(self, shared: Iterable[str]):
        self.shared = sorted(shared)
        super().__init__(f"Node sets must be disjoint; shared: {', '.join(self.shared)}")


class ClusterMapError(AbsCheckError):
    pass


class UnvalidatedClusterMap(ClusterMapError):
    pass


# --- Models / kernels ---

class ModelError(AbsCheckError):
    pass


class ShapeMismatch(ModelError):
    def __init__(self, node: Optional[str], detail: str):
        self.node = node
        prefix = f"Kernel of '{node}': " if node else ""
        super().__init__(prefix + detail)


class NonStochasticRow(ModelError):
    def __init__(self, node: Optional[str], row: int, total: float):
        self.node = node
        self.row = row
        self.total = total
        who = f"'{node}'" if node else "kernel"
        super().__init__(f"Row {row} of {who} sums to {total!r}, not 1")


class InvalidQuery(AbsCheckError):
    pass


class ZeroEvidence(AbsCheckError):
    def __init__(self, evidence: dict, mass: float):
        self.evidence = dict(evidence)
        self.mass = mass
        super().__init__(f"Evidence {self.evidence} has probability {mass!r}")


class PartialMap(AbsCheckError):
    def __init__(self, missing: tuple):
        self.missing = missing
        super().__init__(f"Map is not total: no image for {missing}")


# --- Abstractions ---

class TauError(AbsCheckError):
    def __init__(self, node: Optional[str], detail: str):
        self.node = node
        prefix = f"tau component '{node}': " if node else "tau: "
        super().__init__(prefix + detail)


class EpsilonError(AbsCheckError):
    def __init__(self, node: str, detail: str):
        self.node = node
        super().__init__(f"epsilon component '{node}': {detail}")


class ZeroClusterMass(AbsCheckError):
    def __init__(self, node: str, value: str):
        self.node = node
        self.value = value
        super().__init__(f"High value {node}={value} has zero probability under the low model")


class IncompatibleAbstractions(AbsCheckError):
    pass


# --- Do-calculus ---

class SizeLimitExceeded(AbsCheckError):
    def __init__(self, what: str, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"{what} has {size} joint values (limit {limit})")


class InconclusiveAllZeroMass(AbsCheckError):
    def __init__(self, skipped: int):
        self.skipped = skipped
        super().__init__(f"All {skipped} conditioning assignments have zero probability")


# --- Files ---

class FormatError(AbsCheckError):
    def __init__(self, location: str, detail: str):
        self.location = location
        super().__init__(f"{location}: {detail}")
