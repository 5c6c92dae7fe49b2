"""Commands that evaluate one model or graph: intervene, joint, enumerate, project, dsep, fixture."""

import os

from abscheck.errors import FormatError, InvalidQuery
from abscheck.fixtures import FIXTURES, write_fixture
from abscheck.models.graph import Dag
from abscheck.models.query import Query
from abscheck.routers.base import (
    EXIT_FAILED,
    CommandResult,
    fmt_assignment,
    fmt_p,
    kernel_lines,
    kernel_rows,
    nodes_arg,
    parse_assignment,
)
from abscheck.services import engine
from abscheck.services.graph_service import d_separated, latent_projection
from abscheck.services.query_service import enumerate_queries, evaluate, evaluate_at
from abscheck.utils.io import dump_graph, load_graph, load_model, save_graph


def intervene(args) -> CommandResult:
    model = load_model(args.model)
    values = parse_assignment(args.do)
    do_set = set(nodes_arg(args.do_set))
    if values and do_set and do_set != set(values):
        raise InvalidQuery("--do and --do-set name different nodes")
    q = Query(do_set=frozenset(do_set or values), outcome_set=frozenset(nodes_arg(args.target)))

    k = evaluate_at(model, q, values) if values else evaluate(model, q)
    if values:
        lines = [
            f"p({fmt_assignment(dict(zip(k.outputs, o)))} | do({fmt_assignment(values)})) = {fmt_p(p)}"
            for o, p in zip(k.output_assignments(), k.table[0])
        ]
        rows = [{"do": values, "probs": kernel_rows(k)[0]["probs"]}]
    else:
        lines, rows = kernel_lines(k), kernel_rows(k)
    return CommandResult(
        data={"query": str(q), "do_set": list(k.inputs) or sorted(values), "target": list(k.outputs), "rows": rows},
        lines=[str(q)] + lines,
    )


def joint(args) -> CommandResult:
    model = load_model(args.model)
    d = engine.joint(model)
    return CommandResult(data={"nodes": list(d.outputs), "rows": kernel_rows(d)}, lines=kernel_lines(d))


def enumerate_cmd(args) -> CommandResult:
    g = load_graph(args.model)
    queries = enumerate_queries(g if isinstance(g, Dag) else Dag(nodes=g.nodes, edges=g.directed))
    return CommandResult(
        data={
            "count": len(queries),
            "queries": [{"do_set": g.order(q.do_set), "outcome_set": g.order(q.outcome_set)} for q in queries],
        },
        lines=[f"{len(queries)} queries"] + [str(q) for q in queries],
    )


def project(args) -> CommandResult:
    g = load_graph(args.model)
    if not isinstance(g, Dag):
        raise FormatError(args.model, "already an ADMG; nothing to project")
    observed = nodes_arg(args.observed) or None
    admg = latent_projection(g, observed)
    if args.out:
        save_graph(admg, args.out)
    return CommandResult(data={"admg": dump_graph(admg)}, lines=[str(admg)])


def dsep(args) -> CommandResult:
    g = load_graph(args.model)
    x, y, z = nodes_arg(args.x), nodes_arg(args.y), nodes_arg(args.given)
    result = d_separated(g, x, y, z)
    statement = f"{{{','.join(x)}}} _||_ {{{','.join(y)}}} | {{{','.join(z)}}}"
    return CommandResult(
        status=0 if result else EXIT_FAILED,
        data={"x": x, "y": y, "given": z, "d_separated": result},
        lines=[f"{statement}: {'d-separated' if result else 'd-connected'}"],
    )


def fixture(args) -> CommandResult:
    written = write_fixture(args.name, args.out)
    return CommandResult(
        data={"fixture": args.name, "files": [os.path.join(args.out, f) for f in written]},
        lines=[os.path.join(args.out, f) for f in written],
    )


def register(sub, common):
    p = sub.add_parser("intervene", parents=[common], help="Interventional distribution p(target | do(...))")
    p.add_argument("--model", required=True)
    p.add_argument("--do-set", default="", help="Set-level intervention: A,B")
    p.add_argument("--do", default="", help="Value-level intervention: A=a,B=b")
    p.add_argument("--target", default="", help="Outcome nodes: C,D")
    p.set_defaults(handler=intervene)

    p = sub.add_parser("joint", parents=[common], help="Full joint distribution")
    p.add_argument("--model", required=True)
    p.set_defaults(handler=joint)

    p = sub.add_parser("enumerate", parents=[common], help="All interventional query signatures")
    p.add_argument("--model", required=True)
    p.set_defaults(handler=enumerate_cmd)

    p = sub.add_parser("project", parents=[common], help="Latent projection to an ADMG")
    p.add_argument("--model", required=True)
    p.add_argument("--observed", default="", help="Nodes to keep (default: the non-latent nodes)")
    p.add_argument("--out", default=None, help="Write the ADMG as a graph file")
    p.set_defaults(handler=project)

    p = sub.add_parser("dsep", parents=[common], help="d-separation test (exit 1 when d-connected)")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--given", default="")
    p.set_defaults(handler=dsep)

    p = sub.add_parser("fixture", parents=[common], help="Write a bundled fixture")
    p.add_argument("name", choices=list(FIXTURES))
    p.add_argument("--out", required=True)
    p.set_defaults(handler=fixture)
