import logging
from pathlib import Path
from typing import List

import numpy as np

from app.api.deps import field_center, initial_field, seeded_rng
from app.models.experiment import ExperimentConfig, RunContext
from app.models.fields import WeightField
from app.models.lattice import Domain
from app.services.functional import GradientFlowService
from app.services.neck import weight_omega_eta_k
from app.services.spectral import assemble, extended_index_stacked, solve, sylvester_invariance
from app.utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

VARYING_WEIGHT_LABELS = ["omega_eta_k", "random"]


def varying_weights(config: ExperimentConfig, domain: Domain, rng: np.random.Generator) -> List[WeightField]:
    """omega_{eta,k} around the field center at the first family scale, and a seeded field in [0.5, 2]"""
    family = config.family()
    center = np.asarray(field_center(domain), dtype=float).reshape(4, 1, 1, 1, 1)
    radius = np.sqrt(np.sum((domain.geometry.coords - center) ** 2, axis=0))
    omega = weight_omega_eta_k(family.eta, family.delta(min(family.k_values)), radius)
    return [
        WeightField(domain=domain, values=omega),
        WeightField(domain=domain, values=rng.uniform(0.5, 2.0, domain.shape)),
    ]


def handle(config: ExperimentConfig, out: Path, context: RunContext) -> dict:
    """Spectrum of the configured quadratic form at the initial (optionally relaxed) field

    Writes spectrum.json (report, extended index, Sylvester check) and eigenvalues.csv.
    """
    p, solver = config.physics.p, config.solver
    rng = seeded_rng(context)
    A = initial_field(config, rng)
    if solver.relax_steps:
        A = GradientFlowService().run(A, p, solver.relax_steps).field

    problem = assemble(A, p, WeightField.constant(A.domain), solver.form, normalized=solver.normalized)
    k = min(solver.k_eig, problem.size)
    report = solve(problem, k, solver.tol_zero)
    extended = extended_index_stacked(problem, A, k, solver.tol_zero, solver.tol_kernel)

    sylvester = None
    if solver.weights:
        weights = [WeightField.constant(A.domain, w) for w in solver.weights] + varying_weights(config, A.domain, rng)
        labels = [repr(w) for w in solver.weights] + VARYING_WEIGHT_LABELS
        sylvester = sylvester_invariance(problem, weights, k, labels=labels)

    stamp = context.stamp()
    write_csv(out / "eigenvalues.csv", [{"i": i, "eigenvalue": v} for i, v in enumerate(report.eigenvalues)],
              columns=["i", "eigenvalue"], stamp=stamp)
    summary = {
        "domain": A.domain.descriptor(),
        "p": p,
        "form": solver.form.value,
        "normalized": solver.normalized,
        "report": report,
        "extended": extended,
        "sylvester": sylvester,
    }
    write_json(out / "spectrum.json", summary, stamp)
    logger.info("spectrum: index=%d nullity=%d extended=%d", report.index, report.nullity, extended.extended_index)
    return summary
