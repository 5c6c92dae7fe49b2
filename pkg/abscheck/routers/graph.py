"""`graph merge|delete|validate-map`."""

from abscheck.errors import FormatError
from abscheck.models.graph import Dag
from abscheck.routers.base import EXIT_FAILED, CommandResult
from abscheck.services.graph_service import delete_node, merge_nodes, validate_cluster_map
from abscheck.utils.io import cluster_map_from_file, dump_graph, load_graph, read_abstraction_file, save_graph


def _dag(path: str) -> Dag:
    g = load_graph(path)
    if not isinstance(g, Dag):
        raise FormatError(path, "expected a DAG, found bidirected edges")
    return g


def merge(args) -> CommandResult:
    g = merge_nodes(_dag(args.model), args.a, args.b, args.name or f"{args.a}{args.b}")
    if args.out:
        save_graph(g, args.out)
    return CommandResult(data={"graph": dump_graph(g)}, lines=[str(g)])


def delete(args) -> CommandResult:
    g = delete_node(_dag(args.model), args.node)
    if args.out:
        save_graph(g, args.out)
    return CommandResult(data={"graph": dump_graph(g)}, lines=[str(g)])


def validate_map(args) -> CommandResult:
    low, high = _dag(args.low), _dag(args.high)
    cm = cluster_map_from_file(read_abstraction_file(args.map), low, args.map)
    result = validate_cluster_map(low, high, cm)
    data = {
        "valid": result.valid,
        "witness": [str(op) for op in result.witness],
        "reasons": list(result.reasons),
        "cyclic_merges": [list(p) for p in result.cyclic_merges],
        "blocked_confounders": list(result.blocked_confounders),
    }
    if result.valid:
        lines = ["valid graphical abstraction", "witness: " + (", ".join(data["witness"]) or "(none)")]
    else:
        lines = ["NOT a graphical abstraction"] + [f"  {r}" for r in result.reasons]
    return CommandResult(status=0 if result.valid else EXIT_FAILED, data=data, lines=lines)


def register(sub, common):
    graph = sub.add_parser("graph", help="Graphical abstraction operations")
    ops = graph.add_subparsers(dest="graph_command", required=True)

    p = ops.add_parser("merge", parents=[common], help="Merge two nodes")
    p.add_argument("--model", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--name", default=None, help="Merged node name (default: a and b concatenated)")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=merge)

    p = ops.add_parser("delete", parents=[common], help="Delete a non-confounder")
    p.add_argument("--model", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=delete)

    p = ops.add_parser("validate-map", parents=[common], help="Is high a graphical abstraction of low under the map?")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--map", required=True)
    p.set_defaults(handler=validate_map)
