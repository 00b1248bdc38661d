"""Weak-form assembly of the stability operators and their generalized spectra.

For a perturbation vector a on the selected dofs, a^T K a reproduces the chosen
quadratic form of ``app.services.functional`` and a^T M a = int |a|^2 w.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.sparse.linalg import norm as sparse_norm

from app.core.config import settings
from app.core.exceptions import (
    ConfigurationError,
    DomainMismatchError,
    ParameterRangeError,
    SolverConvergenceError,
    SylvesterMismatchError,
)
from app.models.fields import GaugeField, WeightField
from app.models.spectral import (
    ExtendedIndexReport,
    FormKind,
    LowerBoundReport,
    SolverInfo,
    SpectralReport,
    StabilityProblem,
    SylvesterReport,
    ToleranceSweepEntry,
)
from app.services.algebra import algebra_for, index_of
from app.services.field import curvature, operator_matrix
from app.services.functional import rho
from app.utils.validation import validate_count, validate_exponent, validate_positive

logger = logging.getLogger(__name__)


def one_form_dofs(mask: np.ndarray, dim: int) -> np.ndarray:
    """Flat indices of the 1-form coefficients living on the masked sites"""
    selected = np.broadcast_to(mask[None, ..., None], (4,) + mask.shape + (dim,))
    return np.flatnonzero(selected.reshape(-1))


def _site_diagonal(site_values: np.ndarray, components: int, dim: int) -> sparse.dia_matrix:
    expanded = np.broadcast_to(site_values[None, ..., None], (components,) + site_values.shape + (dim,))
    return sparse.diags(expanded.reshape(-1))


def curvature_action_matrix(A: GaugeField, site_weight: np.ndarray) -> sparse.csr_matrix:
    """Symmetric matrix with a^T M a = sum_s w(s) <F(s), [a ^ a](s)>"""
    F = curvature(A)
    algebra = algebra_for(A.dim)
    pairs = index_of(2)
    n_sites = A.domain.n_sites
    dim = A.dim
    weighted = F.values * site_weight[None, ..., None]
    blocks = [[None] * 4 for _ in range(4)]
    for mu in range(4):
        for nu in range(4):
            if mu == nu:
                continue
            sign = 1.0 if mu < nu else -1.0
            component = weighted[pairs[(min(mu, nu), max(mu, nu))]].reshape(n_sites, dim)
            entries = sign * np.einsum("abc,sc->sab", algebra.structure, component)
            blocks[mu][nu] = sparse.bsr_matrix(
                (entries, np.arange(n_sites), np.arange(n_sites + 1)), shape=(n_sites * dim, n_sites * dim)
            )
    for mu in range(4):
        blocks[mu][mu] = sparse.csr_matrix((n_sites * dim, n_sites * dim))
    return sparse.bmat(blocks, format="csr")


def curvature_pairing_matrix(A: GaugeField) -> sparse.csr_matrix:
    """Phi with (Phi beta)(s) = <F(s), beta(s)> for 2-forms beta"""
    F = curvature(A)
    n_sites = A.domain.n_sites
    dim = A.dim
    rows = np.repeat(np.arange(n_sites), dim)
    cols = np.arange(n_sites * dim)
    pieces = [
        sparse.coo_matrix((F.values[K].reshape(-1), (rows, cols)), shape=(n_sites, n_sites * dim))
        for K in range(6)
    ]
    return sparse.hstack(pieces, format="csr")


def _check_symmetric(matrix: sparse.spmatrix, name: str) -> sparse.csr_matrix:
    matrix = sparse.csr_matrix(matrix)
    scale = abs(matrix).max() if matrix.nnz else 0.0
    defect = abs(matrix - matrix.T).max() if matrix.nnz else 0.0
    if defect > settings.SYMMETRY_TOLERANCE * max(scale, 1.0):
        raise ConfigurationError(f"{name} is not symmetric (defect {defect:.3e})")
    return ((matrix + matrix.T) * 0.5).tocsr()


def _check_positive_mass(mass: sparse.csr_matrix) -> None:
    diagonal = mass.diagonal()
    off_diagonal = mass - sparse.diags(diagonal)
    if off_diagonal.nnz == 0 or abs(off_diagonal).max() == 0.0:
        if np.any(diagonal <= 0.0):
            raise ParameterRangeError("mass matrix must be positive definite")
        return
    try:
        linalg.cholesky(mass.toarray())
    except linalg.LinAlgError as exc:
        raise ParameterRangeError("mass matrix must be positive definite") from exc


def from_matrices(stiffness, mass, label: str = "") -> StabilityProblem:
    """Wrap explicit symmetric matrices (dense or sparse) as a stability problem"""
    K = _check_symmetric(sparse.csr_matrix(stiffness, dtype=float), "stiffness")
    M = _check_symmetric(sparse.csr_matrix(mass, dtype=float), "mass")
    if K.shape != M.shape or K.shape[0] != K.shape[1]:
        raise ConfigurationError(f"stiffness {K.shape} and mass {M.shape} must be equal square shapes")
    _check_positive_mass(M)
    return StabilityProblem(stiffness=K, mass=M, label=label)


def assemble(
    A: GaugeField,
    p: float,
    weight: WeightField,
    form: FormKind = FormKind.Q_CAL,
    normalized: bool = False,
    mask: Optional[np.ndarray] = None,
) -> StabilityProblem:
    """
    Assemble the stiffness and mass matrices of a quadratic form at A

    Args:
        A: Connection at which the form is taken
        p: Exponent of the energy
        weight: Positive weight defining the mass pairing
        form: Which quadratic form to assemble
        normalized: Drop the overall factor p of Q (and of Q inside Q_frak)
        mask: Sites whose coefficients are free (defaults to the domain support)

    Returns:
        StabilityProblem on the selected dofs
    """
    p = validate_exponent(p)
    form = FormKind(form)
    if weight.domain != A.domain:
        raise DomainMismatchError(f"weight on {weight.domain!r}, field on {A.domain!r}")
    geometry = A.domain.geometry
    if mask is None:
        mask = geometry.support
    elif np.any(mask & ~geometry.support):
        raise ConfigurationError("dof mask must lie inside the domain support")
    w = np.asarray(weight.values, dtype=float)
    if not np.all(np.isfinite(w[mask])) or np.any(w[mask] <= 0.0):
        raise ParameterRangeError("weight must be positive on every free site")

    dim = A.dim
    F = curvature(A)
    density = rho(F.norm_sq, p) * geometry.region
    region = geometry.region.astype(float)
    C = operator_matrix(A, 1)
    G = operator_matrix(A, 0)

    if form == FormKind.Q_CAL:
        K = C.T @ _site_diagonal(region, 6, dim) @ C + G @ _site_diagonal(region, 1, dim) @ G.T
        K = K + curvature_action_matrix(A, density)
    elif form == FormKind.NECK:
        K = C.T @ _site_diagonal(density, 6, dim) @ C + G @ _site_diagonal(density, 1, dim) @ G.T
        K = K + curvature_action_matrix(A, density)
    else:
        Phi = curvature_pairing_matrix(A) @ C
        coupling = (p - 2.0) * density / (1.0 + F.norm_sq)
        K = C.T @ _site_diagonal(density, 6, dim) @ C + curvature_action_matrix(A, density)
        K = K + Phi.T @ sparse.diags(coupling.reshape(-1)) @ Phi
        if not normalized:
            K = K * p
        if form == FormKind.Q_FRAK:
            K = K + G @ _site_diagonal(density, 1, dim) @ G.T

    dofs = one_form_dofs(mask, dim)
    h4 = A.domain.cell_volume
    K = (K.tocsr() * h4)[dofs][:, dofs]
    mass_values = np.broadcast_to(w[None, ..., None], (4,) + w.shape + (dim,)).reshape(-1)[dofs]
    M = sparse.diags(h4 * mass_values, format="csr")

    K = _check_symmetric(K, "stiffness")
    logger.debug("assembled %s on %d dofs (p=%.4f)", form.value, dofs.size, p)
    return StabilityProblem(
        stiffness=K, mass=M, form=form, domain=A.domain, dofs=dofs, dim=dim, label=form.value
    )


def reweight(problem: StabilityProblem, weight: Union[WeightField, np.ndarray], label: str = "") -> StabilityProblem:
    """Same stiffness, mass from a new weight (a WeightField or one positive value per dof)"""
    if isinstance(weight, WeightField):
        if problem.dofs is None:
            raise ConfigurationError("site weights need a lattice-assembled problem")
        w = weight.values
        expanded = np.broadcast_to(w[None, ..., None], (4,) + w.shape + (problem.dim,)).reshape(-1)
        diagonal = problem.domain.cell_volume * expanded[problem.dofs]
    else:
        diagonal = np.asarray(weight, dtype=float).reshape(-1)
        if diagonal.size != problem.size:
            raise ConfigurationError(f"expected {problem.size} mass entries, got {diagonal.size}")
    if not np.all(np.isfinite(diagonal)) or np.any(diagonal <= 0.0):
        raise ParameterRangeError("weight must be positive on every free site")
    return StabilityProblem(
        stiffness=problem.stiffness,
        mass=sparse.diags(diagonal, format="csr"),
        form=problem.form,
        domain=problem.domain,
        dofs=problem.dofs,
        dim=problem.dim,
        label=label or problem.label,
    )


def gershgorin_lower_bound(problem: StabilityProblem) -> float:
    """Gershgorin lower bound for the spectrum of M^{-1/2} K M^{-1/2} (diagonal M)"""
    scale = sparse.diags(1.0 / np.sqrt(problem.mass.diagonal()))
    S = (scale @ problem.stiffness @ scale).tocsr()
    diagonal = S.diagonal()
    off = np.asarray(abs(S).sum(axis=1)).ravel() - np.abs(diagonal)
    return float(np.min(diagonal - off))


def _residuals(problem: StabilityProblem, values: np.ndarray, vectors: np.ndarray) -> List[float]:
    K, M = problem.stiffness, problem.mass
    if vectors is None or len(values) == 0:
        return []
    return [float(np.linalg.norm(K @ vectors[:, i] - values[i] * (M @ vectors[:, i]))) for i in range(len(values))]


def eigenpairs(problem: StabilityProblem, k: int) -> Tuple[np.ndarray, np.ndarray, SolverInfo]:
    """The k lowest generalized eigenpairs, M-orthonormal eigenvectors in columns"""
    n = problem.size
    k = validate_count(k, "k", 1, n)
    if n <= settings.DENSE_DOF_THRESHOLD:
        logger.info("dense generalized eigensolve on %d dofs (k=%d)", n, k)
        values, vectors = linalg.eigh(
            problem.stiffness.toarray(), problem.mass.toarray(), subset_by_index=[0, k - 1]
        )
        info = SolverInfo(method="dense", dofs=n, requested=k)
    else:
        estimate = gershgorin_lower_bound(problem)
        shift = -2.0 * abs(estimate) - 1e-6 * max(1.0, abs(estimate))
        logger.info("shift-invert eigensolve on %d dofs (k=%d, sigma=%.4e)", n, k, shift)
        try:
            values, vectors = eigsh(problem.stiffness, k=k, M=problem.mass, sigma=shift, which="LM")
        except ArpackNoConvergence as exc:
            residuals = _residuals(problem, exc.eigenvalues, exc.eigenvectors)
            raise SolverConvergenceError(
                f"shift-invert Lanczos converged on {len(exc.eigenvalues)} of {k} eigenpairs", residuals
            ) from exc
        info = SolverInfo(method="shift-invert", dofs=n, requested=k, shift=shift)

    order = np.argsort(values)
    values, vectors = values[order], vectors[:, order]
    residuals = _residuals(problem, values, vectors)
    info.max_residual = max(residuals) if residuals else 0.0
    return values, vectors, info


def _counts(values: np.ndarray, tol_zero: float) -> Tuple[int, int]:
    index = int(np.sum(values < -tol_zero))
    nullity = int(np.sum(np.abs(values) <= tol_zero))
    return index, nullity


def default_tol_zero(values: np.ndarray) -> float:
    return settings.TOL_ZERO_FACTOR * float(np.max(np.abs(values))) if len(values) else 0.0


def report_from_eigenvalues(
    values: np.ndarray, tol_zero: Optional[float] = None, dofs: Optional[int] = None, info: Optional[SolverInfo] = None
) -> SpectralReport:
    values = np.sort(np.asarray(values, dtype=float))
    if tol_zero is None:
        tol_zero = default_tol_zero(values)
    index, nullity = _counts(values, tol_zero)
    sweep = {}
    for name, factor in (("x10", 10.0), ("div10", 0.1)):
        swept_index, swept_nullity = _counts(values, tol_zero * factor)
        sweep[name] = ToleranceSweepEntry(tol_zero=tol_zero * factor, index=swept_index, nullity=swept_nullity)
        if swept_nullity != nullity:
            logger.warning(
                "nullity %d changes to %d at tol_zero x %g", nullity, swept_nullity, factor
            )
    size = dofs if dofs is not None else len(values)
    truncated = index + nullity == len(values) and len(values) < size
    return SpectralReport(
        eigenvalues=values.tolist(),
        index=index,
        nullity=nullity,
        extended_index=index + nullity,
        tol_zero=tol_zero,
        tol_sweep=sweep,
        truncated=truncated,
        solver=info,
    )


def solve(problem: StabilityProblem, k: int, tol_zero: Optional[float] = None) -> SpectralReport:
    """
    Lowest k generalized eigenvalues with index and nullity counts

    Args:
        problem: Assembled stiffness/mass pair
        k: Number of eigenvalues to compute (at most the dof count)
        tol_zero: Zero tolerance (defaults to 1e-7 times the largest computed |eigenvalue|)

    Returns:
        SpectralReport with eigenvalues, index, nullity and the tolerance sweep
    """
    values, _, info = eigenpairs(problem, k)
    return report_from_eigenvalues(values, tol_zero=tol_zero, dofs=problem.size, info=info)


def extended_index_stacked(
    problem: StabilityProblem,
    A: GaugeField,
    k: int,
    tol_zero: Optional[float] = None,
    tol_kernel: float = settings.TOL_KERNEL,
) -> ExtendedIndexReport:
    """Index plus dim(ker Q intersected with ker d_A*), from the singular values of d_A*
    restricted to the near-null eigenvectors."""
    if problem.dofs is None or problem.domain != A.domain:
        raise ConfigurationError("the stacked kernel needs a problem assembled at A")
    tol_kernel = validate_positive(tol_kernel, "tol_kernel")
    values, vectors, _ = eigenpairs(problem, k)
    if tol_zero is None:
        tol_zero = default_tol_zero(values)
    index, nullity = _counts(values, tol_zero)
    null_vectors = vectors[:, np.abs(values) <= tol_zero]

    gauge_fixed = 0
    singular_values: List[float] = []
    if null_vectors.shape[1]:
        null_vectors = null_vectors / np.linalg.norm(null_vectors, axis=0)
        codifferential = operator_matrix(A, 0).T.tocsr()[:, problem.dofs]
        operator_scale = np.sqrt(sparse_norm(codifferential, 1) * sparse_norm(codifferential, np.inf))
        singular = linalg.svdvals(codifferential @ null_vectors)
        singular_values = singular.tolist()
        rank = int(np.sum(singular > tol_kernel * operator_scale))
        gauge_fixed = null_vectors.shape[1] - rank

    return ExtendedIndexReport(
        index=index,
        nullity=nullity,
        gauge_fixed_kernel=gauge_fixed,
        extended_index=index + gauge_fixed,
        tol_zero=tol_zero,
        tol_kernel=tol_kernel,
        singular_values=singular_values,
    )


def sylvester_invariance(
    template: StabilityProblem,
    weights: Sequence[Union[WeightField, np.ndarray]],
    k: int,
    labels: Optional[Sequence[str]] = None,
) -> SylvesterReport:
    """
    Solve one stiffness against several masses and compare (index, nullity)

    Raises:
        SylvesterMismatchError: If any two weights disagree
    """
    if len(weights) < 2:
        raise ParameterRangeError("sylvester_invariance needs at least two weights")
    labels = list(labels) if labels is not None else [f"w{i}" for i in range(len(weights))]
    problems = [reweight(template, weight, label) for weight, label in zip(weights, labels)]

    with ThreadPoolExecutor(max_workers=max(settings.PYM_WORKERS, 1)) as pool:
        reports = list(pool.map(lambda problem: solve(problem, k), problems))

    counts = [(report.index, report.nullity) for report in reports]
    if len(set(counts)) > 1:
        diff = [
            {"weight": label, "index": report.index, "nullity": report.nullity, "tol_zero": report.tol_zero}
            for label, report in zip(labels, reports)
        ]
        raise SylvesterMismatchError(f"(index, nullity) differs across weights: {counts}", diff)
    index, nullity = counts[0]
    logger.info("sylvester invariance holds across %d weights: index=%d nullity=%d", len(reports), index, nullity)
    return SylvesterReport(
        index=index, nullity=nullity, weights=labels, eigenvalues=[report.eigenvalues for report in reports]
    )


def spectrum_lower_bound_check(
    A: GaugeField,
    p: float,
    eta: float,
    delta: float,
    center: Optional[np.ndarray] = None,
    k: int = 1,
) -> LowerBoundReport:
    """Lowest eigenvalue of Q_cal against the omega_{eta,k} mass and its provable floor"""
    from app.services.neck import weight_omega_eta_k

    p = validate_exponent(p)
    geometry = A.domain.geometry
    center = np.zeros(4) if center is None else np.asarray(center, dtype=float)
    radius = np.sqrt(np.sum((geometry.coords - center.reshape(4, 1, 1, 1, 1)) ** 2, axis=0))
    omega = weight_omega_eta_k(eta, delta, radius)
    weight = WeightField(domain=A.domain, values=omega)

    F = curvature(A)
    forcing = rho(F.norm_sq, p) * F.norm / omega
    mu0 = float(forcing[geometry.support].max())
    floor = -algebra_for(A.dim).bracket_bound * np.sqrt(2.0) * mu0

    report = solve(assemble(A, p, weight, FormKind.Q_CAL), k)
    lam = report.lambda_min
    passed = lam >= floor - report.tol_zero
    logger.info("lower bound check: lambda_min=%.6e floor=%.6e mu0=%.4e", lam, floor, mu0)
    return LowerBoundReport(lambda_min=lam, mu0_fit=mu0, floor=floor, passed=passed, eta=eta, delta=delta)
