from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from abscheck.errors import EpsilonError, TauError
from abscheck.models.graph import ClusterMap
from abscheck.models.kernel import CausalModel, DeterministicMap, Domain, Kernel, product_domain


class TauFamily(BaseModel):
    """Per high node A, a deterministic map from the cluster of A to A's domain.

    Components read the cluster nodes in low declaration order and write the
    single high node.
    """

    model_config = ConfigDict(frozen=True)

    components: Dict[str, DeterministicMap]

    @model_validator(mode="after")
    def _check(self):
        for h, f in self.components.items():
            if f.outputs != (h,):
                raise TauError(h, f"must output exactly '{h}', got {list(f.outputs)}")
            if not f.is_surjective():
                hit = set(f.index)
                missed = [v for j, v in enumerate(f.output_domains[0].values) if j not in hit]
                raise TauError(h, f"not surjective: no preimage for {missed}")
        return self

    def __getitem__(self, h: str) -> DeterministicMap:
        if h not in self.components:
            raise TauError(h, "missing component")
        return self.components[h]

    def high_domain(self, h: str) -> Domain:
        return self[h].output_domains[0]

    @classmethod
    def identity(cls, low: CausalModel, cm: ClusterMap) -> "TauFamily":
        """Keep every joint cluster value as its own high value, labelled 'v1,v2,...'."""
        comps = {}
        for h in cm.high_nodes:
            cluster = low.graph.order(cm.cluster(h))
            doms = low.domains_of(cluster)
            target = doms[0] if len(doms) == 1 else product_domain(doms)
            comps[h] = DeterministicMap(
                inputs=cluster,
                input_domains=doms,
                outputs=(h,),
                output_domains=(target,),
                index=tuple(range(target.size)),
            )
        return cls(components=comps)


class EpsilonFamily(BaseModel):
    """Per high node A, a stochastic kernel from A's domain back into its cluster."""

    model_config = ConfigDict(frozen=True)

    components: Dict[str, Kernel]

    @model_validator(mode="after")
    def _check(self):
        for h, k in self.components.items():
            if k.inputs != (h,):
                raise EpsilonError(h, f"must read exactly '{h}', got {list(k.inputs)}")
        return self

    def __getitem__(self, h: str) -> Kernel:
        if h not in self.components:
            raise EpsilonError(h, "missing component")
        return self.components[h]

    def cluster(self, h: str) -> Tuple[str, ...]:
        return self[h].outputs
