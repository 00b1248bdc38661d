import logging
import math
from pathlib import Path

from app.models.experiment import ExperimentConfig, RunContext
from app.services.instanton import RadialBubbleProfile
from app.services.lorentz import inverse_square_profile, lorentz_norm, neck_quantization_diagnostic, truncation_sequence
from app.utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

NECK_DEPTHS = range(3, 7)


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Weak-L^2 oracle for |x|^-2 and neck quantization norms across neck lengths

    Writes lorentz_necks.csv and lorentz.json.
    """
    physics, shells = config.physics, config.solver.shells
    r0, R = physics.neck_r, physics.neck_R
    weak = lorentz_norm(inverse_square_profile(r0, R, shells), 2.0, math.inf)
    analytic = math.sqrt(math.pi ** 2 / 2.0)
    truncation = truncation_sequence(r0, [R / 4.0, R / 2.0, R], shells)

    family = config.family()
    k = max(family.k_values)
    profile = RadialBubbleProfile(family.delta(k), family.eta)
    outer = family.eta
    reports = []
    for depth in NECK_DEPTHS:
        inner = outer / 2 ** depth
        samples = profile.samples(inner / 2.0, 2.0 * outer, shells)
        report = neck_quantization_diagnostic(samples, inner, outer)
        reports.append(report.model_copy(update={"sweep_label": f"R/{2 ** depth}"}))
    stamp = context.stamp()
    write_csv(out / "lorentz_necks.csv", reports, sort_keys=["r"], stamp=stamp)

    ratios = [report.ratio_l21 for report in reports]
    summary = {
        "inverse_square": {"weak_l2": weak, "analytic": analytic, "relative_error": abs(weak - analytic) / analytic},
        "truncation": truncation,
        "k": k,
        "ratio_l21_min": min(ratios),
        "ratio_l21_max": max(ratios),
    }
    write_json(out / "lorentz.json", summary, stamp)
    return summary
