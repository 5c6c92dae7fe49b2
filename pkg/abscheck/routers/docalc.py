"""`docalc`: do-calculus rules on the cluster ADMG, optionally verified on the low model."""

from abscheck.models.query import RuleQuery
from abscheck.routers.base import EXIT_FAILED, CommandResult, nodes_arg, rule_lines
from abscheck.services.docalc_service import (
    high_admg_from_cluster_map,
    rule_applicable,
    rule_sides,
    verify_rule_on_low,
)
from abscheck.utils.io import cluster_map_from_file, load_model, read_abstraction_file


def docalc(args) -> CommandResult:
    low = load_model(args.low)
    cm = cluster_map_from_file(read_abstraction_file(args.map), low.graph, args.map)
    rq = RuleQuery(
        rule=args.rule,
        x=frozenset(nodes_arg(args.x)),
        y=frozenset(nodes_arg(args.y)),
        z=frozenset(nodes_arg(args.z)),
        w=frozenset(nodes_arg(args.w)),
    )

    if args.verify:
        rep = verify_rule_on_low(low, cm, rq, tol=args.tol)
        status = 0 if rep.applicable and rep.passed else EXIT_FAILED
        return CommandResult(status=status, data=rep.model_dump(), lines=rule_lines(rep))

    h = high_admg_from_cluster_map(low.graph, cm)
    verdict = rule_applicable(h, rq)
    left, right = rule_sides(rq)
    data = {"high_graph": str(h), "left": left, "right": right, **verdict.model_dump()}
    lines = [
        f"high graph: {h}",
        f"rule {rq.rule}: {left} = {right}",
        f"d-separation: {verdict.statement} -> {'holds' if verdict.applicable else 'fails'}",
        f"surgered: {verdict.surgered}",
    ]
    return CommandResult(status=0 if verdict.applicable else EXIT_FAILED, data=data, lines=lines)


def register(sub, common):
    p = sub.add_parser("docalc", parents=[common], help="Apply a do-calculus rule on the cluster ADMG")
    p.add_argument("--low", required=True, help="Low-level model (latents allowed)")
    p.add_argument("--map", required=True, help="Abstraction file clustering the endogenous nodes")
    p.add_argument("--rule", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--x", default="")
    p.add_argument("--y", required=True)
    p.add_argument("--z", default="")
    p.add_argument("--w", default="")
    p.add_argument("--verify", action="store_true", help="Compute both sides on the low model")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(handler=docalc)
