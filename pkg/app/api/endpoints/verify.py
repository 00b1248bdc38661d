import logging
from pathlib import Path

from app.core.exceptions import NumericalError
from app.models.experiment import ExperimentConfig, RunContext
from app.services.inequalities import run_battery
from app.utils.serialization import write_json

logger = logging.getLogger(__name__)


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Run the inequality battery and write scorecard.json

    Raises:
        NumericalError: If any check fails; the scorecard is written first
    """
    fuzz = config.fuzz.model_copy(update={"seed": context.seed})
    scorecard = run_battery(fuzz, context.config_hash, workers=context.workers)
    path = write_json(out / "scorecard.json", scorecard, context.stamp())
    if not scorecard.passed:
        raise NumericalError(f"checks failed: {', '.join(scorecard.failures)}",
                             partial={"scorecard": str(path), "failures": scorecard.failures})
    logger.info("all %d checks passed", len(scorecard.checks))
    return {"scorecard": str(path)}
