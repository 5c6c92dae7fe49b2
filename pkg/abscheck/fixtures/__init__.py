"""Bundled example models and abstractions.

`ab` and `example1` ship as JSON next to this module; `chain`,
`chain-effect` and `voting` are built here so their numbers stay tied to
the construction that makes them pass.
"""

import os
from importlib import resources
from typing import Callable, Dict, List, Tuple

import numpy as np

from abscheck.models.abstraction import EpsilonFamily, TauFamily
from abscheck.models.graph import ClusterMap, Dag
from abscheck.models.kernel import CausalModel, DeterministicMap, Domain, Kernel
from abscheck.models.files import ModelFile
from abscheck.services.abstraction_service import (
    derive_effect_focused_model,
    derive_high_model,
    epsilon_from_tau,
    left_inverse,
)
from abscheck.services.graph_service import ordered_parents
from abscheck.utils.io import model_from_file, read_json, save_abstraction, save_json, save_model

BINARY = Domain.of(0, 1)



def _model(nodes, edges, domains, rows, latent=()) -> CausalModel:
    g = Dag(nodes=tuple(nodes), edges=frozenset(edges), latent=frozenset(latent))
    mechanisms = {}
    for n in g.nodes:
        pas = ordered_parents(g, n)
        mechanisms[n] = Kernel(
            inputs=pas,
            input_domains=tuple(domains[p] for p in pas),
            outputs=(n,),
            output_domains=(domains[n],),
            table=np.asarray(rows[n], dtype=float),
        )
    return CausalModel(graph=g, domains=domains, mechanisms=mechanisms)


def _packaged(name: str) -> dict:
    return read_json(str(resources.files(__package__).joinpath(name)))


# -----------------------------------
# Chain: three levels A->B->C, AB->C, ABC
# -----------------------------------
def chain_models():
    low = _model(
        ["A", "B", "C"],
        [("A", "B"), ("B", "C")],
        {"A": BINARY, "B": BINARY, "C": BINARY},
        {
            "A": [[0.6, 0.4]],
            "B": [[0.7, 0.3], [0.2, 0.8]],
            "C": [[0.9, 0.1], [0.35, 0.65]],
        },
    )
    cm12 = ClusterMap.from_clusters(low.nodes, {"AB": ["A", "B"], "C": ["C"]})
    tau12 = TauFamily.identity(low, cm12)
    mid = derive_high_model(low, cm12, tau12)

    cm23 = ClusterMap.from_clusters(mid.nodes, {"ABC": ["AB", "C"]})
    count = Domain.range(4)
    tau23 = TauFamily(
        components={
            "ABC": DeterministicMap.from_function(
                ("AB", "C"),
                mid.domains_of(("AB", "C")),
                ("ABC",),
                (count,),
                lambda v: (str(sum(int(x) for x in v[0].split(",")) + int(v[1])),),
            )
        }
    )
    high = derive_high_model(mid, cm23, tau23)
    return low, mid, high, (cm12, tau12), (cm23, tau23)


def chain_direct(low: CausalModel) -> Tuple[ClusterMap, TauFamily]:
    """The number of ones in (A, B, C), built in one step."""
    cm = ClusterMap.from_clusters(low.nodes, {"ABC": ["A", "B", "C"]})
    tau = TauFamily(
        components={
            "ABC": DeterministicMap.from_function(
                low.nodes, low.domains_of(low.nodes), ("ABC",), (Domain.range(4),),
                lambda v: (str(sum(int(x) for x in v)),),
            )
        }
    )
    return cm, tau


# -----------------------------------
# Chain with an effect-side clustering of B
# -----------------------------------
def chain_effect_models():
    """A->B->C with B in {0,1,2,3} clustered into lo={0,1}, hi={2,3}.

    p(b | a) = p(b | cluster) p(cluster | a), so the effect-side squares
    commute, while p(c | b) differs inside each cluster, so the cause-side
    square at C does not.
    """
    within = {"lo": [0.25, 0.75], "hi": [0.6, 0.4]}
    p_lo = {0: 0.8, 1: 0.3}
    rows_b = []
    for a in (0, 1):
        lo, hi = p_lo[a], 1.0 - p_lo[a]
        rows_b.append([lo * w for w in within["lo"]] + [hi * w for w in within["hi"]])
    b_dom = Domain.range(4)
    low = _model(
        ["A", "B", "C"],
        [("A", "B"), ("B", "C")],
        {"A": BINARY, "B": b_dom, "C": BINARY},
        {
            "A": [[0.6, 0.4]],
            "B": rows_b,
            "C": [[0.9, 0.1], [0.3, 0.7], [0.5, 0.5], [0.8, 0.2]],
        },
    )
    cm = ClusterMap.identity(low.nodes)
    cluster_dom = Domain.of("lo", "hi")
    eps = EpsilonFamily(
        components={
            "A": Kernel.identity(("A",), ("A",), (BINARY,)),
            "B": Kernel(
                inputs=("B",),
                input_domains=(cluster_dom,),
                outputs=("B",),
                output_domains=(b_dom,),
                table=np.array([within["lo"] + [0.0, 0.0], [0.0, 0.0] + within["hi"]]),
            ),
            "C": Kernel.identity(("C",), ("C",), (BINARY,)),
        }
    )
    high = derive_effect_focused_model(low, cm, eps)
    return low, high, cm, eps


# -----------------------------------
# Voting: 2 ads, 8 voters in two groups, group sums as high nodes
# -----------------------------------
VOTER_BIAS = {1: [0.3, -0.2, 0.1, 0.5], 2: [-0.4, 0.2, 0.0, 0.6]}
GROUP_EFFECT = {1: (-1.0, 1.5, 0.5), 2: (0.5, -1.0, 1.2)}  # intercept, ad 1, ad 2


def voting_models(group_size: int = 4):
    """Each voter votes with logit bias_i + effect_g(a1, a2).

    Within a group the vote vector given the ads depends on the ads only
    through the group's vote count, which is what the effect-side
    abstraction onto the two counts relies on.
    """
    ads = ["A1", "A2"]
    groups = {g: [f"V{(g - 1) * group_size + i + 1}" for i in range(group_size)] for g in (1, 2)}
    voters = groups[1] + groups[2]
    domains = {n: BINARY for n in ads + voters}
    rows = {"A1": [[0.5, 0.5]], "A2": [[0.5, 0.5]]}
    for g, members in groups.items():
        c0, c1, c2 = GROUP_EFFECT[g]
        for i, v in enumerate(members):
            table = []
            for a1 in (0, 1):
                for a2 in (0, 1):
                    p = 1.0 / (1.0 + np.exp(-(VOTER_BIAS[g][i % 4] + c0 + c1 * a1 + c2 * a2)))
                    table.append([1.0 - p, p])
            rows[v] = table
    edges = [(a, v) for v in voters for a in ads]
    low = _model(ads + voters, edges, domains, rows)

    cm = ClusterMap.from_clusters(low.nodes, {"A1": ["A1"], "A2": ["A2"], "S1": groups[1], "S2": groups[2]})
    count = Domain.range(group_size + 1)

    def total(v):
        return (str(sum(int(x) for x in v)),)

    tau = TauFamily(
        components={
            "A1": DeterministicMap.identity(("A1",), (BINARY,)),
            "A2": DeterministicMap.identity(("A2",), (BINARY,)),
            "S1": DeterministicMap.from_function(groups[1], [BINARY] * group_size, ("S1",), (count,), total),
            "S2": DeterministicMap.from_function(groups[2], [BINARY] * group_size, ("S2",), (count,), total),
        }
    )
    eps = epsilon_from_tau(low, cm, tau)
    high = derive_effect_focused_model(low, cm, eps)
    return low, high, cm, tau, eps


# -----------------------------------
# Registry
# -----------------------------------
def _write_packaged(names: List[str], out_dir: str) -> List[str]:
    for name in names:
        save_json(os.path.join(out_dir, name), _packaged(name))
    return names


def _write_ab(out_dir: str) -> List[str]:
    return _write_packaged(["ab.json", "ab-identity.json"], out_dir)


def _write_example1(out_dir: str) -> List[str]:
    return _write_packaged(["example1.json", "example1-map.json"], out_dir)


def _write_chain(out_dir: str) -> List[str]:
    low, mid, high, (cm12, tau12), (cm23, tau23) = chain_models()
    cm, tau = chain_direct(low)
    save_model(low, os.path.join(out_dir, "chain.json"))
    save_model(mid, os.path.join(out_dir, "chain-mid.json"))
    save_model(high, os.path.join(out_dir, "chain-high.json"))
    save_abstraction(cm12, tau12, os.path.join(out_dir, "chain-map1.json"))
    save_abstraction(cm23, tau23, os.path.join(out_dir, "chain-map2.json"))
    save_abstraction(cm, tau, os.path.join(out_dir, "chain-direct.json"))
    return ["chain.json", "chain-mid.json", "chain-high.json", "chain-map1.json", "chain-map2.json", "chain-direct.json"]


def _write_chain_effect(out_dir: str) -> List[str]:
    low, high, cm, eps = chain_effect_models()
    save_model(low, os.path.join(out_dir, "chain-effect.json"))
    save_model(high, os.path.join(out_dir, "chain-effect-high.json"))
    save_abstraction(cm, left_inverse(eps), os.path.join(out_dir, "chain-effect-map.json"), eps)
    return ["chain-effect.json", "chain-effect-high.json", "chain-effect-map.json"]


def _write_voting(out_dir: str) -> List[str]:
    low, high, cm, tau, eps = voting_models()
    save_model(low, os.path.join(out_dir, "voting.json"))
    save_model(high, os.path.join(out_dir, "voting-high.json"))
    save_abstraction(cm, tau, os.path.join(out_dir, "voting-map.json"), eps)
    return ["voting.json", "voting-high.json", "voting-map.json"]


FIXTURES: Dict[str, Callable[[str], List[str]]] = {
    "ab": _write_ab,
    "example1": _write_example1,
    "chain": _write_chain,
    "chain-effect": _write_chain_effect,
    "voting": _write_voting,
}


def write_fixture(name: str, out_dir: str) -> List[str]:
    """Write fixture `name` into out_dir; returns the file names written."""
    return FIXTURES[name](out_dir)


def load_packaged_model(name: str) -> CausalModel:
    return model_from_file(ModelFile.model_validate(_packaged(name)), name)
