"""Reading and writing model and abstraction files."""

import json
import os
from typing import Dict, Optional, Union

import numpy as np
from pydantic import ValidationError

from abscheck.errors import FormatError, NonStochasticRow, ShapeMismatch, UnknownNode
from abscheck.models.abstraction import EpsilonFamily, TauFamily
from abscheck.models.files import AbstractionFile, KernelSpec, ModelFile, NodeSpec, TauEntry
from abscheck.models.graph import Admg, ClusterMap, Dag
from abscheck.models.kernel import (
    CausalModel,
    DeterministicMap,
    Domain,
    Kernel,
    assignments,
    product_domain,
)
from abscheck.services.graph_service import ordered_parents
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)


def ensure_dir(p: str):
    if p:
        os.makedirs(p, exist_ok=True)


def save_json(path: str, data):
    ensure_dir(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None


def _parse(schema, data, location: str):
    try:
        return schema.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise FormatError(f"{location}:{where}" if where else location, err["msg"]) from None


# -----------------------------------
# Models and graphs
# -----------------------------------
def graph_from_file(mf: ModelFile) -> Union[Dag, Admg]:
    nodes = tuple(n.name for n in mf.nodes)
    if mf.bidirected:
        if any(n.latent for n in mf.nodes):
            raise FormatError("nodes", "a file with bidirected edges cannot also mark latent nodes")
        return Admg(nodes=nodes, directed=mf.edges, bidirected=mf.bidirected)
    return Dag(nodes=nodes, edges=mf.edges, latent=frozenset(n.name for n in mf.nodes if n.latent))


def model_from_file(mf: ModelFile, location: str = "model") -> CausalModel:
    g = graph_from_file(mf)
    if isinstance(g, Admg):
        raise FormatError(location, "file describes an ADMG (bidirected edges); it has no kernels")
    domains = {n.name: Domain(values=tuple(n.values)) for n in mf.nodes}
    unknown = sorted(set(mf.kernels) - set(g.nodes))
    if unknown:
        raise UnknownNode(unknown[0], f"{location} kernels")

    mechanisms = {}
    for n in g.nodes:
        spec = mf.kernels.get(n)
        if spec is None:
            raise FormatError(f"{location}:kernels", f"no kernel for node '{n}'")
        pas = ordered_parents(g, n)
        if tuple(spec.parents) != pas:
            raise ShapeMismatch(n, f"parents {spec.parents} must be {list(pas)} in declared order")
        table = np.asarray(spec.rows, dtype=float)
        expected = (int(np.prod([domains[p].size for p in pas], dtype=int)), domains[n].size)
        if table.ndim != 2 or table.shape != expected:
            raise ShapeMismatch(n, f"rows have shape {table.shape}, expected {expected}")
        try:
            mechanisms[n] = Kernel(
                inputs=pas,
                input_domains=tuple(domains[p] for p in pas),
                outputs=(n,),
                output_domains=(domains[n],),
                table=table,
            )
        except NonStochasticRow as e:
            raise NonStochasticRow(n, e.row, e.total) from None
    return CausalModel(graph=g, domains=domains, mechanisms=mechanisms)


def model_to_file(m: CausalModel) -> ModelFile:
    return ModelFile(
        nodes=[NodeSpec(name=n, values=list(m.domains[n].values), latent=n in m.latent) for n in m.nodes],
        edges=m.graph.sorted_edges(),
        kernels={
            n: KernelSpec(parents=list(m.mechanisms[n].inputs), rows=m.mechanisms[n].table.tolist())
            for n in m.nodes
        },
    )


def graph_to_file(g: Union[Dag, Admg]) -> ModelFile:
    """Graph-only file; every node gets the placeholder domain ["0", "1"]."""
    if isinstance(g, Admg):
        pos = {n: i for i, n in enumerate(g.nodes)}
        key = lambda e: (pos[e[0]], pos[e[1]])
        return ModelFile(
            nodes=[NodeSpec(name=n, values=["0", "1"]) for n in g.nodes],
            edges=sorted(g.directed, key=key),
            bidirected=sorted(g.bidirected, key=key),
        )
    return ModelFile(
        nodes=[NodeSpec(name=n, values=["0", "1"], latent=n in g.latent) for n in g.nodes],
        edges=g.sorted_edges(),
    )


def _model_json(mf: ModelFile) -> dict:
    data = {
        "format_version": mf.format_version,
        "nodes": [
            {"name": n.name, "values": n.values, **({"latent": True} if n.latent else {})} for n in mf.nodes
        ],
        "edges": [list(e) for e in mf.edges],
    }
    if mf.bidirected:
        data["bidirected"] = [list(e) for e in mf.bidirected]
    if mf.kernels:
        data["kernels"] = {n: {"parents": k.parents, "rows": k.rows} for n, k in mf.kernels.items()}
    return data


def read_model_file(path: str) -> ModelFile:
    return _parse(ModelFile, read_json(path), path)


def load_model(path: str) -> CausalModel:
    model = model_from_file(read_model_file(path), path)
    logger.debug("loaded %s: %d nodes", path, len(model.nodes))
    return model


def load_graph(path: str) -> Union[Dag, Admg]:
    return graph_from_file(read_model_file(path))


def save_model(m: CausalModel, path: str):
    save_json(path, _model_json(model_to_file(m)))


def save_graph(g: Union[Dag, Admg], path: str):
    save_json(path, _model_json(graph_to_file(g)))


def dump_model(m: CausalModel) -> dict:
    return _model_json(model_to_file(m))


def dump_graph(g: Union[Dag, Admg]) -> dict:
    return _model_json(graph_to_file(g))


# -----------------------------------
# Abstractions
# -----------------------------------
def read_abstraction_file(path: str) -> AbstractionFile:
    return _parse(AbstractionFile, read_json(path), path)


def cluster_map_from_file(af: AbstractionFile, low_graph: Dag, location: str = "abstraction") -> ClusterMap:
    """Cluster map over the low nodes the file mentions, in low declaration order."""
    covered = {n for members in af.clusters.values() for n in members} | set(af.removed)
    for n in sorted(covered):
        if n not in low_graph.nodes:
            raise UnknownNode(n, location)
    low_nodes = tuple(n for n in low_graph.nodes if n in covered)
    return ClusterMap.from_clusters(low_nodes, af.clusters, af.removed)


def _high_domain(h: str, af: AbstractionFile, high: Optional[CausalModel], entries) -> Optional[Domain]:
    if high is not None and h in high.domains:
        return high.domains[h]
    if h in af.high_values:
        return Domain(values=tuple(af.high_values[h]))
    if entries:
        seen: Dict[str, None] = {}
        for e in entries:
            seen.setdefault(e.high)
        return Domain(values=tuple(seen))
    return None


def tau_from_file(
    af: AbstractionFile, low: CausalModel, cm: ClusterMap, high: Optional[CausalModel] = None, location: str = "abstraction"
) -> TauFamily:
    """tau components from the file; a missing component is the identity on the cluster."""
    unknown = sorted(set(af.tau) - set(cm.high_nodes))
    if unknown:
        raise UnknownNode(unknown[0], f"{location}:tau")
    comps = {}
    for h in cm.high_nodes:
        cluster = low.graph.order(cm.cluster(h))
        doms = low.domains_of(cluster)
        entries = af.tau.get(h, [])
        target = _high_domain(h, af, high, entries)
        if target is None:
            target = product_domain(doms)
        if not entries:
            mapping = {a: (",".join(a),) for a in assignments(doms)}
        else:
            mapping = {}
            for i, e in enumerate(entries):
                key = tuple(e.low)
                if len(key) != len(cluster):
                    raise FormatError(f"{location}:tau.{h}.{i}", f"expected {len(cluster)} low values for {list(cluster)}")
                if key in mapping:
                    raise FormatError(f"{location}:tau.{h}.{i}", f"low values {list(key)} listed twice")
                mapping[key] = (e.high,)
        comps[h] = DeterministicMap.from_mapping(cluster, doms, (h,), (target,), mapping)
    return TauFamily(components=comps)


def epsilon_from_file(
    af: AbstractionFile, low: CausalModel, cm: ClusterMap, tau: TauFamily, location: str = "abstraction"
) -> Optional[EpsilonFamily]:
    if not af.epsilon:
        return None
    comps = {}
    for h in cm.high_nodes:
        if h not in af.epsilon:
            raise FormatError(f"{location}:epsilon", f"no epsilon table for '{h}'")
        cluster = low.graph.order(cm.cluster(h))
        table = np.asarray(af.epsilon[h], dtype=float)
        try:
            comps[h] = Kernel(
                inputs=(h,),
                input_domains=(tau.high_domain(h),),
                outputs=cluster,
                output_domains=low.domains_of(cluster),
                table=table,
            )
        except (ShapeMismatch, NonStochasticRow) as e:
            raise FormatError(f"{location}:epsilon.{h}", str(e)) from None
    return EpsilonFamily(components=comps)


def joint_tau_from_file(af: AbstractionFile, low: CausalModel, cm: ClusterMap, tau: TauFamily) -> Optional[DeterministicMap]:
    if af.joint_tau is None:
        return None
    wires = tuple(n for h in cm.high_nodes for n in low.graph.order(cm.cluster(h)))
    mapping = {tuple(a): tuple(b) for a, b in af.joint_tau}
    return DeterministicMap.from_mapping(
        wires,
        low.domains_of(wires),
        cm.high_nodes,
        tuple(tau.high_domain(h) for h in cm.high_nodes),
        mapping,
    )


def abstraction_to_file(cm: ClusterMap, tau: TauFamily, eps: Optional[EpsilonFamily] = None) -> AbstractionFile:
    return AbstractionFile(
        clusters={h: list(tau[h].inputs) for h in cm.high_nodes},
        removed=list(cm.removed),
        tau={
            h: [TauEntry(low=list(a), high=tau[h](a)[0]) for a in assignments(tau[h].input_domains)]
            for h in cm.high_nodes
        },
        high_values={h: list(tau.high_domain(h).values) for h in cm.high_nodes},
        epsilon={h: eps[h].table.tolist() for h in cm.high_nodes} if eps is not None else {},
    )


def save_abstraction(cm: ClusterMap, tau: TauFamily, path: str, eps: Optional[EpsilonFamily] = None):
    save_json(path, abstraction_to_file(cm, tau, eps).to_json())
