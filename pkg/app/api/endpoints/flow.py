import logging
from pathlib import Path

from app.api.deps import initial_field, seeded_rng
from app.models.experiment import ExperimentConfig, RunContext
from app.services.functional import GradientFlowService, el_residual, ym_p_energy
from app.utils.serialization import save_snapshot, write_csv, write_json

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["step", "energy", "residual_norm", "step_size"]


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Minimize YM_p from the configured initial field

    Writes flow_log.csv (one row per iteration), flow.json and the final field as flow_field.npz.
    """
    p = config.physics.p
    A0 = initial_field(config, seeded_rng(context))
    logger.info("flow at p=%.4f on %s, %d steps", p, A0.domain.kind.value, config.solver.steps)
    result = GradientFlowService().run(A0, p, config.solver.steps)

    stamp = context.stamp()
    write_csv(out / "flow_log.csv", result.log, columns=LOG_COLUMNS, sort_keys=["step"], stamp=stamp)
    save_snapshot(out / "flow_field.npz", result.field)
    residual = el_residual(result.field, p)
    summary = {
        "domain": A0.domain.descriptor(),
        "p": p,
        "iterations": result.iterations,
        "converged": result.converged,
        "initial_energy": ym_p_energy(A0, p),
        "final_energy": ym_p_energy(result.field, p),
        "residual_norm": residual.norm,
        "acceptance_threshold": residual.acceptance_threshold,
        "split_defect": residual.split_defect,
    }
    write_json(out / "flow.json", summary, stamp)
    return summary
