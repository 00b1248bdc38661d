import logging
from pathlib import Path

from app.core.exceptions import ParameterRangeError
from app.models.experiment import ExperimentConfig, RunContext
from app.services.instanton import RadialBubbleProfile
from app.services.neck import constant_sweep, neck_envelope_check, weight_table
from app.utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

CONSTANT_COLUMNS = ["p", "eps", "r", "R", "name", "value"]
WEIGHT_COLUMNS = ["p", "radius", "omega_p", "omega_2", "bound"]
NECK_DEPTHS = range(3, 7)  # r = R/8 ... R/64


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Constant-stack sweep, weight tables and the pointwise bound along a glued bubble neck

    Writes neck_constants.csv, neck_weights.csv, neck_bounds.csv and neck.json.
    """
    physics = config.physics
    stamp = context.stamp()
    r, R, C = physics.neck_r, physics.neck_R, physics.bochner_c

    constants = constant_sweep(physics.p_grid, physics.eps_grid, r, R, C, context.workers)
    write_csv(out / "neck_constants.csv", constants, columns=CONSTANT_COLUMNS,
              sort_keys=["p", "eps", "name"], stamp=stamp)

    weights = []
    for p in physics.p_grid:
        try:
            weights.extend({"p": p, **row} for row in weight_table(p, r, R, C=C))
        except ParameterRangeError as exc:
            logger.warning("no weight table at p=%.4f: %s", p, exc)
    write_csv(out / "neck_weights.csv", weights, columns=WEIGHT_COLUMNS, sort_keys=["p", "radius"], stamp=stamp)

    family = config.family()
    k = max(family.k_values)
    profile = RadialBubbleProfile(family.delta(k), family.eta)
    outer = family.eta
    bounds = []
    for depth in NECK_DEPTHS:
        inner = outer / 2 ** depth
        samples = profile.samples(inner / 4.0, 4.0 * outer, config.solver.shells)
        bounds.append(neck_envelope_check(samples, physics.p, inner, outer, C=C))
    write_csv(out / "neck_bounds.csv", bounds, sort_keys=["r"], stamp=stamp)

    fitted = [report.fitted_constant for report in bounds]
    summary = {
        "constant_rows": len(constants),
        "weight_rows": len(weights),
        "k": k,
        "delta": family.delta(k),
        "fitted_constant_min": min(fitted),
        "fitted_constant_max": max(fitted),
    }
    write_json(out / "neck.json", summary, stamp)
    return summary
