import logging
from pathlib import Path

from app.models.experiment import ExperimentConfig, RunContext
from app.services.instanton import energy_identity_check, index_semicontinuity_experiment, p_schedule_check
from app.utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

ROW_COLUMNS = [
    "k", "delta", "p", "total", "background", "bubble_energy", "defect", "detected", "product", "holder_ok",
    "resolved", "window_radius", "neck_sites", "dofs", "index", "nullity", "extended_index", "nullity_fixed",
    "lower_holds", "upper_holds", "upper_holds_fixed",
]


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Bubbling-family bookkeeping: energy identity, p-schedule and index semicontinuity per k

    Writes bubble_k.csv (one row per k) and bubble.json.
    """
    family = config.family()
    solver = config.solver
    energy = {k: energy_identity_check(family, k) for k in family.k_values}
    schedule = p_schedule_check(family)
    index = index_semicontinuity_experiment(
        family,
        n_eigen=solver.k_eig,
        relax_steps=solver.relax_steps,
        window_factor=solver.window_factor,
        points_per_scale=solver.points_per_scale,
        budget=solver.lattice_budget,
        workers=context.workers,
    )

    schedule_rows = {row.k: row for row in schedule.rows}
    index_rows = {row.k: row for row in index.rows}
    rows = []
    for k in family.k_values:
        e, s, i = energy[k], schedule_rows[k], index_rows[k]
        rows.append({
            "k": k, "delta": e.delta, "p": s.p, "total": e.total, "background": e.background,
            "bubble_energy": sum(e.bubbles), "defect": e.defect, "detected": s.detected, "product": s.product,
            "holder_ok": s.holder_ok, "resolved": i.resolved, "window_radius": i.window_radius,
            "neck_sites": i.neck_sites, "dofs": i.dofs, "index": i.index,
            "nullity": i.nullity, "extended_index": i.extended_index, "nullity_fixed": i.nullity_fixed,
            "lower_holds": i.lower_holds, "upper_holds": i.upper_holds, "upper_holds_fixed": i.upper_holds_fixed,
        })
    stamp = context.stamp()
    write_csv(out / "bubble_k.csv", rows, columns=ROW_COLUMNS, sort_keys=["k"], stamp=stamp)

    defects = [energy[k].defect for k in sorted(energy)]
    summary = {
        "family": family,
        "energy_defect_decreasing": all(b <= a for a, b in zip(defects, defects[1:])),
        "schedule": schedule,
        "index": index,
    }
    write_json(out / "bubble.json", summary, stamp)
    logger.info("bubble family: %d k-values, %d resolved", len(rows), sum(row["resolved"] for row in rows))
    return summary
