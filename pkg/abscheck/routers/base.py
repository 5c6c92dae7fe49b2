"""Shared pieces of the command handlers: results, flags and text rendering."""

import argparse
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from abscheck.errors import InvalidQuery
from abscheck.models.kernel import Kernel
from abscheck.models.query import node_list
from abscheck.models.report import AbstractionReport, RuleReport

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class CommandResult(BaseModel):
    """What a handler hands back to the driver: exit status, JSON payload, text lines."""

    status: int = EXIT_OK
    data: Dict[str, Any] = Field(default_factory=dict)
    lines: List[str] = Field(default_factory=list)


def common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--output", choices=["text", "json"], default="text", help="Report format on stdout")
    parent.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO logs, -vv for DEBUG")
    return parent


def parse_assignment(text: Optional[str]) -> Dict[str, str]:
    """'A=1,B=0' -> {'A': '1', 'B': '0'}."""
    out: Dict[str, str] = {}
    for part in node_list(text or ""):
        if "=" not in part:
            raise InvalidQuery(f"expected NODE=VALUE, got '{part}'")
        node, value = (s.strip() for s in part.split("=", 1))
        if not node or not value:
            raise InvalidQuery(f"expected NODE=VALUE, got '{part}'")
        if node in out:
            raise InvalidQuery(f"'{node}' assigned twice")
        out[node] = value
    return out


def nodes_arg(text: Optional[str]) -> List[str]:
    return list(node_list(text or ""))


def fmt_p(p: float) -> str:
    return f"{p:.12g}"


def fmt_res(r: float) -> str:
    return f"{r:.2e}"


def fmt_assignment(values: Dict[str, str]) -> str:
    return ",".join(f"{k}={v}" for k, v in values.items())


def kernel_rows(k: Kernel) -> List[Dict[str, Any]]:
    rows = []
    outs = list(k.output_assignments())
    for i, given in enumerate(k.input_assignments()):
        rows.append(
            {
                "do": dict(zip(k.inputs, given)),
                "probs": [
                    {"outcome": dict(zip(k.outputs, o)), "p": float(k.table[i, j])} for j, o in enumerate(outs)
                ],
            }
        )
    return rows


def kernel_lines(k: Kernel) -> List[str]:
    lines = []
    for row in kernel_rows(k):
        cond = f" | do({fmt_assignment(row['do'])})" if row["do"] else ""
        for entry in row["probs"]:
            lines.append(f"p({fmt_assignment(entry['outcome'])}{cond}) = {fmt_p(entry['p'])}")
    return lines


def report_lines(rep: AbstractionReport) -> List[str]:
    verdict = "PASS" if rep.passed else "FAIL"
    lines = [f"[{rep.check}] {verdict}  max residual {fmt_res(rep.max_residual)} (tol {fmt_res(rep.tolerance)})"]
    for s in rep.squares:
        mark = "ok " if s.residual <= rep.tolerance else "BAD"
        extra = f"  skipped {s.skipped}" if s.skipped else ""
        lines.append(f"  {mark} {s.name}: {fmt_res(s.residual)}{extra}")
    for f in rep.failures:
        lines.append(f"  failure: {f}")
    for n in rep.notes:
        lines.append(f"  note: {n}")
    for w in rep.witnesses:
        conflict = f"  (vs {fmt_assignment(w.conflicting_given)})" if w.conflicting_given else ""
        given = fmt_assignment(w.given) or "-"
        lines.append(
            f"  witness {w.where}: given {given} outcome {fmt_assignment(w.outcome)}: "
            f"{fmt_p(w.left)} vs {fmt_p(w.right)}{conflict}"
        )
    return lines


def rule_lines(rep: RuleReport) -> List[str]:
    lines = [
        f"high graph: {rep.high_graph}",
        f"rule {rep.rule}: {rep.left} = {rep.right}",
        f"d-separation: {rep.statement} -> {'holds' if rep.applicable else 'fails'}",
    ]
    for row in rep.rows:
        value = "skipped (zero mass)" if row.residual is None else fmt_res(row.residual)
        lines.append(f"  {fmt_assignment(row.assignment) or '-'}: {value}")
    lines.append(
        f"max residual {fmt_res(rep.max_residual)} over {len(rep.rows) - rep.skipped} assignments, {rep.skipped} skipped"
    )
    return lines
