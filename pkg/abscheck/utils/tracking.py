from datetime import datetime
from typing import List, Optional

from abscheck.config import settings
from abscheck.models.report import AbstractionReport
from abscheck.utils.logs import get_logger

logger = get_logger(__name__)


def now_stamp() -> str:
    return datetime.now().strftime("%Y%m%d_%H%M%S")


def log_wandb(
    enabled: bool,
    reports: List[AbstractionReport],
    config: dict,
    project: Optional[str] = None,
    run_name: Optional[str] = None,
    model_paths: Optional[List[str]] = None,
):
    """Mirror check reports into a W&B run. Never affects the verdict."""
    if not enabled:
        return
    try:
        import wandb  # type: ignore
    except Exception as e:
        logger.warning("Not logging to wandb (import failed): %s", e)
        return

    wandb.init(project=project or settings.WANDB_PROJECT, name=run_name or f"check_{now_stamp()}", config=config)
    wandb.log(
        {
            f"{r.check}/max_residual": r.max_residual for r in reports
        }
        | {f"{r.check}/passed": int(r.passed) for r in reports}
    )

    # One row per commuting square
    columns = ["check", "square", "residual", "skipped", "passed"]
    data = [
        [r.check, s.name, float(s.residual), s.skipped, s.residual <= r.tolerance]
        for r in reports
        for s in r.squares
    ]
    wandb.log({"squares": wandb.Table(columns=columns, data=data)})

    if any(r.witnesses for r in reports):
        columns = ["check", "where", "given", "outcome", "left", "right", "residual"]
        data = [
            [r.check, w.where, str(w.given), str(w.outcome), w.left, w.right, w.residual]
            for r in reports
            for w in r.witnesses
        ]
        wandb.log({"witnesses": wandb.Table(columns=columns, data=data)})

    # Register the input files for traceability
    if model_paths:
        art = wandb.Artifact("abstraction_inputs", type="model-files")
        for p in model_paths:
            art.add_file(p)
        wandb.log_artifact(art)

    wandb.finish()
