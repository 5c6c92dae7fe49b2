"""`check` and `compose`: verifying abstractions between model files."""

from typing import List

from abscheck.config import settings
from abscheck.models.report import AbstractionReport
from abscheck.routers.base import EXIT_FAILED, CommandResult, report_lines
from abscheck.services.abstraction_service import (
    check_effect_focused,
    check_interventional_consistency,
    check_naturality,
    check_right_inverse,
    check_sufficient_statistic,
    compose_abstractions,
    epsilon_from_tau,
    left_inverse,
    require_factorizing,
)
from abscheck.utils.io import (
    abstraction_to_file,
    cluster_map_from_file,
    epsilon_from_file,
    joint_tau_from_file,
    load_model,
    read_abstraction_file,
    save_abstraction,
    tau_from_file,
)
from abscheck.utils.logs import get_logger
from abscheck.utils.tracking import log_wandb

logger = get_logger(__name__)


def check(args) -> CommandResult:
    low, high = load_model(args.low), load_model(args.high)
    af = read_abstraction_file(args.map)
    cm = cluster_map_from_file(af, low.graph, args.map)
    tau = tau_from_file(af, low, cm, high, args.map)
    eps = epsilon_from_file(af, low, cm, tau, args.map)
    witness_limit = 0 if args.all_witnesses else None
    tol = args.tol if args.tol is not None else settings.SEMANTIC_TOL

    reports: List[AbstractionReport] = []
    data = {"mode": args.mode, "scope": args.scope}
    if args.mode in ("cause", "both"):
        joint = joint_tau_from_file(af, low, cm, tau)
        if joint is not None:
            require_factorizing(tau, joint)
        reports.append(check_naturality(low, high, cm, tau, tol=tol, witness_limit=witness_limit))
        reports.append(
            check_interventional_consistency(low, high, cm, tau, scope=args.scope, tol=tol, witness_limit=witness_limit)
        )
    if args.mode in ("effect", "both"):
        if eps is None:
            logger.info("no epsilon tables in %s; using the cluster conditionals", args.map)
            eps = epsilon_from_tau(low, cm, tau)
        else:
            data["right_inverse"] = check_right_inverse(tau, eps)
        reports.append(check_effect_focused(low, high, cm, eps, tol=tol, witness_limit=witness_limit))
        reports.append(check_sufficient_statistic(low, cm, left_inverse(eps), tol=tol, witness_limit=witness_limit))

    passed = all(r.passed for r in reports) and data.get("right_inverse", True)
    data["passed"] = passed
    data["reports"] = [r.model_dump() for r in reports]

    lines = []
    for r in reports:
        lines += report_lines(r)
    if "right_inverse" in data:
        lines.append(f"tau o eps = id: {'yes' if data['right_inverse'] else 'NO'}")
    lines.append("verdict: " + ("PASS" if passed else "FAIL"))

    log_wandb(
        enabled=args.wandb,
        reports=reports,
        config={"low": args.low, "high": args.high, "map": args.map, "mode": args.mode, "scope": args.scope, "tol": tol},
        model_paths=[args.low, args.high, args.map],
    )
    return CommandResult(status=0 if passed else EXIT_FAILED, data=data, lines=lines)


def compose(args) -> CommandResult:
    low, mid = load_model(args.low), load_model(args.mid)
    high = load_model(args.high) if args.high else None

    af12 = read_abstraction_file(args.map1)
    cm12 = cluster_map_from_file(af12, low.graph, args.map1)
    tau12 = tau_from_file(af12, low, cm12, mid, args.map1)
    af23 = read_abstraction_file(args.map2)
    cm23 = cluster_map_from_file(af23, mid.graph, args.map2)
    tau23 = tau_from_file(af23, mid, cm23, high, args.map2)

    cm13, tau13 = compose_abstractions(cm12, tau12, cm23, tau23)
    if args.out:
        save_abstraction(cm13, tau13, args.out)

    data = {"abstraction": abstraction_to_file(cm13, tau13).to_json()}
    lines = [f"{h} <- {', '.join(cm13.cluster(h))}" for h in cm13.high_nodes]
    if cm13.removed:
        lines.append("removed: " + ", ".join(cm13.removed))
    status = 0
    if high is not None:
        rep = check_naturality(low, high, cm13, tau13, witness_limit=0 if args.all_witnesses else None)
        data["naturality"] = rep.model_dump()
        lines += report_lines(rep)
        status = 0 if rep.passed else EXIT_FAILED
    return CommandResult(status=status, data=data, lines=lines)


def register(sub, common):
    p = sub.add_parser("check", parents=[common], help="Check an abstraction between two models")
    p.add_argument("--low", required=True)
    p.add_argument("--high", required=True)
    p.add_argument("--map", required=True, help="Abstraction file")
    p.add_argument("--mode", choices=["cause", "effect", "both"], default="cause")
    p.add_argument("--scope", choices=["nodes", "subsets"], default="subsets")
    p.add_argument("--tol", type=float, default=None, help="Residual tolerance (default ABSCHECK_SEMANTIC_TOL)")
    p.add_argument("--all-witnesses", action="store_true", help="List every violating entry")
    p.add_argument("--wandb", action="store_true", help="Enable Weights & Biases logging")
    p.set_defaults(handler=check)

    p = sub.add_parser("compose", parents=[common], help="Compose two abstractions")
    p.add_argument("--low", required=True)
    p.add_argument("--mid", required=True)
    p.add_argument("--high", default=None, help="If given, check the composite against it")
    p.add_argument("--map1", required=True, help="Abstraction low -> mid")
    p.add_argument("--map2", required=True, help="Abstraction mid -> high")
    p.add_argument("--out", default=None, help="Write the composite abstraction file")
    p.add_argument("--all-witnesses", action="store_true")
    p.set_defaults(handler=compose)
