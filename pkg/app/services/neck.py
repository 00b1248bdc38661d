"""Neck analysis: the barrier constant stack, weight functions and neck diagnostics.

Radial quantities accept either a lattice CurvatureField (sampled around a
center) or RadialSamples, so the same checks run on 4-D lattices and on 1-D
radial profiles.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import ParameterRangeError, SupportError
from app.models.fields import CurvatureField, FormValue, GaugeField, LatticeForm, WeightField
from app.models.lattice import erode
from app.models.neck import (
    ConstantRow,
    DyadicProfile,
    GaffneyHardyReport,
    NeckConstants,
    NeckPositivityReport,
    NeckProfile,
    NeckSpectrumReport,
    PointwiseBoundReport,
    RadialSamples,
    SupersolutionReport,
)
from app.models.spectral import FormKind
from app.services.algebra import curvature_endo, form_norm_sq
from app.services.field import curvature, d, d_star, integrate, l2_norm
from app.services.functional import neck_form
from app.services.spectral import assemble, solve
from app.utils.validation import (
    validate_exponent,
    validate_in_annulus,
    validate_nonnegative,
    validate_positive,
    validate_radii,
)

logger = logging.getLogger(__name__)

# Corners (s, t) of the admissible set 0 <= A(x, x) <= tr A <= 2
ENDO_CORNERS = ((0.0, 0.0), (0.0, 2.0), (2.0, 2.0))

CurvatureData = Union[CurvatureField, RadialSamples]


# Constant stack

def mu(p: float) -> float:
    """Kato-Yau constant max(2 - p/2 + 1/(2(p-1)), 1)"""
    p = validate_exponent(p)
    return max(2.0 - p / 2.0 + 1.0 / (2.0 * (p - 1.0)), 1.0)


def kappa(p: float, gamma: float) -> float:
    p = validate_exponent(p)
    return (p - 1.0) * max(2.0 - gamma, 0.0)


def kappa_beta(p: float, beta: float) -> float:
    p = validate_exponent(p)
    return 2.0 * (p - 1.0) * max(1.0 - beta, 0.0)


def _denominator(p: float, C: float) -> float:
    return 1.0 - C * (p - 2.0) - (p - 2.0) ** 2


def gamma_p(p: float, C: float = settings.BOCHNER_C) -> float:
    """
    Decay exponent 2 - mu(p)(1 - C(p-2) - (p-2)^2)/(p-1)

    Raises:
        ParameterRangeError: If p is too large for C (the bracket is no longer positive)
            or the value leaves (0, 2)
    """
    p = validate_exponent(p)
    C = validate_nonnegative(C, "C")
    denominator = _denominator(p, C)
    if denominator <= 0.0:
        raise ParameterRangeError(f"p={p} is too large for C={C}: 1 - C(p-2) - (p-2)^2 = {denominator:.3e}")
    gamma = 2.0 - mu(p) * denominator / (p - 1.0)
    if not 0.0 < gamma < 2.0:
        raise ParameterRangeError(f"gamma={gamma} outside (0, 2) at p={p}, C={C}")
    return gamma


def _barrier_coefficients(p: float) -> Tuple[float, float]:
    a = 1.0 + 2.0 * (p - 2.0)
    return a, 3.0 - p


def delta_pm(eps: float, p: float) -> Tuple[float, float]:
    """Roots (delta_-, delta_+) of X(2-X) - 2(p-2)X(X+1) - eps in closed form"""
    p = validate_exponent(p)
    eps = validate_nonnegative(eps, "eps")
    if eps >= 1.0:
        raise ParameterRangeError(f"eps={eps} must be < 1")
    a, b = _barrier_coefficients(p)
    discriminant = 1.0 - a * eps / b ** 2
    if discriminant < 0.0:
        raise ParameterRangeError(f"no real barrier exponent at eps={eps}, p={p} (discriminant {discriminant:.3e})")
    root = math.sqrt(discriminant)
    return b / a * (1.0 - root), b / a * (1.0 + root)


def delta_roots(eps: float, p: float) -> Tuple[float, float]:
    """The same roots from numpy's companion-matrix solver"""
    a, _ = _barrier_coefficients(validate_exponent(p))
    roots = np.roots([-a, 2.0 - 2.0 * (p - 2.0), -float(eps)])
    roots = np.sort(np.real_if_close(roots, tol=1e6).real)
    return float(roots[0]), float(roots[-1])


def sigma_pm(eps: float, p: float, C: float = settings.BOCHNER_C) -> Tuple[float, float]:
    gamma = gamma_p(p, C)
    lo, hi = delta_pm(eps, p)
    factor = 1.0 + 1.0 / gamma
    return factor * lo - 2.0, factor * hi - 2.0


def eps_p(p: float, C: float = settings.BOCHNER_C) -> float:
    """4 - delta_+(0, p) / gamma(p)"""
    return 4.0 - delta_pm(0.0, p)[1] / gamma_p(p, C)


def neck_constants(p: float, eps: float = 0.0, C: float = settings.BOCHNER_C) -> NeckConstants:
    gamma = gamma_p(p, C)
    lo, hi = delta_pm(eps, p)
    root_lo, root_hi = delta_roots(eps, p)
    s_lo, s_hi = sigma_pm(eps, p, C)
    return NeckConstants(
        p=p,
        eps=eps,
        bochner_c=C,
        mu=mu(p),
        gamma=gamma,
        kappa_gamma=kappa(p, gamma),
        delta_minus=lo,
        delta_plus=hi,
        sigma_minus=s_lo,
        sigma_plus=s_hi,
        eps_p=eps_p(p, C),
        root_minus=root_lo,
        root_plus=root_hi,
    )


# Weights

def weight_omega(p: float, R: float, r: float, x, C: float = settings.BOCHNER_C) -> np.ndarray:
    """omega_{p,R,r}(x) = |x|^-2 ((|x|/R)^2 + (r/|x|)^{2 - eps_p}) on r <= |x| <= R"""
    validate_radii(r, R)
    radius = np.abs(np.asarray(x, dtype=float))
    validate_in_annulus(radius, r, R)
    exponent = 2.0 - eps_p(p, C)
    return ((radius / R) ** 2 + (r / radius) ** exponent) / radius ** 2


def weight_omega2(R: float, r: float, x) -> np.ndarray:
    return weight_omega(2.0, R, r, x)


def _check_scales(eta: float, delta: float) -> None:
    validate_positive(eta, "eta")
    validate_positive(delta, "delta")
    if not delta < eta ** 2:
        raise ParameterRangeError(f"delta={delta} must be smaller than eta^2={eta ** 2}")


def weight_omega_eta_k(eta: float, delta: float, x) -> np.ndarray:
    """Three-region weight: outer |x| >= eta, neck delta/eta <= |x| <= eta, bubble core"""
    _check_scales(eta, delta)
    radius = np.abs(np.asarray(x, dtype=float))
    outer = (1.0 + (delta / eta ** 2) ** 2) / eta ** 2
    with np.errstate(divide="ignore"):
        neck = 1.0 / eta ** 2 + delta ** 2 / (eta ** 2 * radius ** 4)
    core = (eta ** 2 / delta ** 2) * (
        (delta / eta ** 2) ** 2 + (1.0 + 1.0 / eta ** 2) ** 2 / (1.0 + radius ** 2 / delta ** 2) ** 2
    )
    return np.where(radius >= eta, outer, np.where(radius >= delta / eta, neck, core))


def omega_eta_inf(eta: float, x) -> np.ndarray:
    validate_positive(eta, "eta")
    return np.full(np.shape(x), 1.0 / eta ** 2)


def omega_bubble_flat(eta: float, pi) -> np.ndarray:
    """Limit of delta^2 omega_{eta,k}(delta pi) as delta -> 0"""
    validate_positive(eta, "eta")
    radius = np.abs(np.asarray(pi, dtype=float))
    inside = (1.0 + eta ** 2) ** 2 / (eta ** 2 * (1.0 + radius ** 2) ** 2)
    with np.errstate(divide="ignore"):
        outside = 1.0 / (eta ** 2 * radius ** 4)
    return np.where(radius <= 1.0 / eta, inside, outside)


def omega_hat_eta_inf(eta: float, pi) -> np.ndarray:
    """The bubble-chart limit in the stereographic normalization"""
    radius = np.abs(np.asarray(pi, dtype=float))
    return omega_bubble_flat(eta, radius) * (1.0 + radius ** 2) ** 2


# Radial barrier

def supersolution_value(p: float, eps: float, sigma, s, t):
    """rho^{sigma+2} L'_{p,eps} rho^{-sigma} for A(x,x) = s and tr A = t"""
    return sigma * (2.0 - sigma) - eps - (p - 2.0) * sigma * (s * (sigma + 2.0) - t)


def radial_operator(p: float, eps: float, sigma: float, s: float, t: float, radii: np.ndarray) -> np.ndarray:
    """Finite-difference L'_{p,eps} rho^{-sigma} on a (possibly geometric) radial grid"""
    radii = np.asarray(radii, dtype=float)
    u = radii ** (-sigma)
    du = np.gradient(u, radii)
    d2u = np.gradient(du, radii)
    laplacian = d2u + 3.0 * du / radii
    hessian_pairing = s * d2u + (t - s) * du / radii
    return -laplacian - (p - 2.0) * hessian_pairing - eps * u / radii ** 2


def supersolution_check(
    p: float,
    eps: float,
    sigma: float,
    radii: Optional[np.ndarray] = None,
    F: Optional[FormValue] = None,
    directions: Optional[np.ndarray] = None,
) -> SupersolutionReport:
    """
    Two-sided bound on the barrier operator applied to rho^{-sigma}

    Args:
        p: Exponent
        eps: Lower-order coefficient
        sigma: Nonnegative barrier power
        radii: Radial grid for the finite-difference cross-check (geometric by default)
        F: Optional batch of curvature 2-forms whose endomorphisms are tested
        directions: Unit radial directions paired with F, shape (*batch, 4)

    Returns:
        SupersolutionReport
    """
    p = validate_exponent(p)
    sigma = validate_nonnegative(sigma, "sigma")
    eps = validate_nonnegative(eps, "eps")
    values = [supersolution_value(p, eps, sigma, s, t) for s, t in ENDO_CORNERS]
    lower, upper = min(values), max(values)
    scale = 1.0 + abs(sigma * (2.0 - sigma)) + eps

    if radii is None:
        radii = np.geomspace(1e-3, 1.0, 2001)
    fd_defect = 0.0
    for s, t in ENDO_CORNERS:
        numeric = radial_operator(p, eps, sigma, s, t, radii) * radii ** (sigma + 2.0)
        exact = supersolution_value(p, eps, sigma, s, t)
        gap = np.abs(numeric[2:-2] - exact) / (1.0 + abs(exact))
        fd_defect = max(fd_defect, float(gap.max()))

    samples, within = 0, True
    if F is not None:
        endo = curvature_endo(F)
        if directions is None:
            raise ParameterRangeError("directions are required with F")
        directions = np.asarray(directions, dtype=float)
        s_values = np.einsum("...a,...ab,...b->...", directions, endo, directions)
        t_values = np.trace(endo, axis1=-2, axis2=-1)
        field_values = supersolution_value(p, eps, sigma, s_values, t_values)
        tol = 1e-12 * scale
        within = bool(np.all((field_values >= lower - tol) & (field_values <= upper + tol)))
        samples = int(np.size(field_values))

    report = SupersolutionReport(
        p=p,
        eps=eps,
        sigma=sigma,
        lower=lower,
        upper=upper,
        nonnegative=lower >= -1e-12 * scale,
        fd_defect=fd_defect,
        field_samples=samples,
        field_within_bounds=within,
    )
    logger.debug("supersolution p=%.4f eps=%.4f sigma=%.4f lower=%.3e", p, eps, sigma, lower)
    return report


# Radial sampling of curvature

def _radius_from(domain, center: Optional[Sequence[float]]) -> np.ndarray:
    geometry = domain.geometry
    if center is None:
        return geometry.radius
    c = np.asarray(center, dtype=float).reshape(4, 1, 1, 1, 1)
    return np.sqrt(np.sum((geometry.coords - c) ** 2, axis=0))


def radial_samples(F: CurvatureField, center: Optional[Sequence[float]] = None) -> RadialSamples:
    """|F| on the region sites with their distance to ``center``"""
    region = F.domain.geometry.region
    radius = _radius_from(F.domain, center)
    return RadialSamples(
        radius=radius[region],
        value=F.norm[region],
        measure=np.full(int(region.sum()), F.domain.cell_volume),
        spacing=F.domain.h,
    )


def _as_samples(data: CurvatureData, center) -> RadialSamples:
    return data if isinstance(data, RadialSamples) else radial_samples(data, center)


def shell_energy(samples: RadialSamples, lo: float, hi: float) -> float:
    """L^2 norm over lo <= |x| < hi"""
    inside = samples.within(lo, hi, closed_upper=False)
    return float(np.sqrt(np.sum(samples.value[inside] ** 2 * samples.measure[inside])))


def dyadic_profile(F: CurvatureData, r: float, R: float, center=None) -> DyadicProfile:
    """L^2 curvature on the dyadic shells [rho, 2 rho), rho = r 2^j, 2 rho <= R"""
    validate_radii(r, R, ratio=2.0)
    samples = _as_samples(F, center)
    radii, energies = [], []
    scale = r
    while 2.0 * scale <= R * (1.0 + 1e-12):
        radii.append(scale)
        energies.append(shell_energy(samples, scale, 2.0 * scale))
        scale *= 2.0
    return DyadicProfile(radii=radii, energies=energies, sup=max(energies, default=0.0))


def _neck_energy(samples: RadialSamples, r: float, R: float) -> float:
    inside = samples.within(r / 2.0, 2.0 * R)
    return float(np.sqrt(np.sum(samples.value[inside] ** 2 * samples.measure[inside])))


def _check_thickness(samples: RadialSamples, r: float, R: float) -> np.ndarray:
    validate_radii(r, R)
    annulus = samples.within(r, R)
    if samples.spacing is not None and R - r < 4.0 * samples.spacing:
        raise ParameterRangeError(f"annulus [{r}, {R}] is thinner than four lattice spacings {samples.spacing}")
    if annulus.sum() < 4:
        raise ParameterRangeError(f"annulus [{r}, {R}] holds fewer than four samples")
    return annulus


def pointwise_bound_check(
    F: CurvatureData, p: float, r: float, R: float, center=None, C: float = settings.BOCHNER_C
) -> PointwiseBoundReport:
    """sup over the annulus of |F| / (E omega_{p,R,r}), E = ||F|| on B_2R minus B_r/2"""
    samples = _as_samples(F, center)
    annulus = _check_thickness(samples, r, R)
    energy = _neck_energy(samples, r, R)
    fitted = 0.0
    if energy > 0.0:
        omega = weight_omega(p, R, r, samples.radius[annulus], C)
        fitted = float(np.max(samples.value[annulus] / (energy * omega)))
    return PointwiseBoundReport(
        fitted_constant=fitted, energy=energy, sites=int(annulus.sum()), r=r, R=R, p=p
    )


def neck_envelope_check(
    F: CurvatureData, p: float, r: float, R: float, center=None, C: float = settings.BOCHNER_C
) -> PointwiseBoundReport:
    """The pointwise estimate with the neck-length factor 1 + (R/r)^{C(p-2)}"""
    base = pointwise_bound_check(F, p, r, R, center, C)
    factor = 1.0 + (R / r) ** (C * (p - 2.0))
    return base.model_copy(update={"fitted_constant": base.fitted_constant / factor, "neck_factor": factor})


def neck_profile(F: CurvatureData, p: float, r: float, R: float, center=None, n: int = 64) -> NeckProfile:
    radii = np.geomspace(r, R, n)
    return NeckProfile(
        r=r,
        R=R,
        p=p,
        radii=radii.tolist(),
        omega_p=weight_omega(p, R, r, radii).tolist(),
        omega_2=weight_omega2(R, r, radii).tolist(),
        dyadic=dyadic_profile(F, r, R, center),
    )


# Lattice neck diagnostics

def annulus_mask(domain, r: float, R: float, center=None) -> np.ndarray:
    radius = _radius_from(domain, center)
    return (radius >= r * (1 - 1e-12)) & (radius <= R * (1 + 1e-12)) & domain.geometry.region


def _require_in_annulus(a: LatticeForm, annulus: np.ndarray) -> None:
    outside = np.abs(a.values[:, ~annulus]).max(initial=0.0)
    if outside > 0.0:
        raise SupportError(f"perturbation reaches {outside:.3e} outside the annulus")


def _annulus_weight(domain, r: float, R: float, center) -> np.ndarray:
    radius = np.clip(_radius_from(domain, center), r, R)
    return weight_omega2(R, r, radius)


def neck_positivity_check(
    A: GaugeField,
    p: float,
    a: LatticeForm,
    r: float,
    R: float,
    center=None,
    bound: float = settings.NECK_BOUND_B,
    gate: float = settings.DYADIC_GATE,
) -> NeckPositivityReport:
    """
    Compare the weighted neck form with int |a|^2 omega_{R,r}

    Raises:
        ParameterRangeError: If (p-2) ln(R/r) exceeds ``bound``
        SupportError: If a is nonzero outside the annulus
    """
    p = validate_exponent(p)
    validate_radii(r, R)
    length = (p - 2.0) * math.log(R / r)
    if length > bound:
        raise ParameterRangeError(f"(p-2) ln(R/r) = {length:.4f} exceeds B = {bound}")
    annulus = annulus_mask(A.domain, r, R, center)
    _require_in_annulus(a, annulus)

    lhs = neck_form(A, a, p)
    omega = _annulus_weight(A.domain, r, R, center)
    rhs = integrate(form_norm_sq(a) * omega * annulus, A.domain)

    dyadic_sup = 0.0
    if 2.0 * r < R:
        dyadic_sup = dyadic_profile(curvature(A), r, R, center).sup
    if dyadic_sup > gate:
        logger.warning("dyadic energy %.4e in the neck exceeds the gate %.4e", dyadic_sup, gate)
    return NeckPositivityReport(
        lhs=lhs,
        rhs=rhs,
        ratio=lhs / rhs if rhs > 0 else float("inf"),
        dyadic_sup=dyadic_sup,
        gate_satisfied=dyadic_sup <= gate,
        neck_length=length,
    )


def neck_positivity_spectrum(A: GaugeField, p: float, r: float, R: float, center=None) -> NeckSpectrumReport:
    """Sharp lattice constant c0: lowest eigenvalue of the neck form against omega_{R,r}"""
    annulus = annulus_mask(A.domain, r, R, center)
    mask = erode(annulus, A.domain.periodic) & A.domain.geometry.support
    if not mask.any():
        raise ParameterRangeError(f"annulus [{r}, {R}] has no interior sites at h={A.domain.h}")
    weight = WeightField(domain=A.domain, values=_annulus_weight(A.domain, r, R, center))
    problem = assemble(A, p, weight, FormKind.NECK, mask=mask)
    report = solve(problem, 1)
    logger.info("neck spectrum r=%.4g R=%.4g: c0=%.6e on %d dofs", r, R, report.lambda_min, problem.size)
    return NeckSpectrumReport(c0=report.lambda_min, dofs=problem.size, r=r, R=R, p=p)


def gaffney_hardy_neck(a: LatticeForm, r: float, R: float, center=None) -> GaffneyHardyReport:
    """int |a|^2 omega_{R,r} against ||da||^2 + ||d*a||^2, with the fitted constant"""
    annulus = annulus_mask(a.domain, r, R, center)
    _require_in_annulus(a, annulus)
    omega = _annulus_weight(a.domain, r, R, center)
    lhs = integrate(form_norm_sq(a) * omega * annulus, a.domain)
    rhs = l2_norm(d(a)) ** 2 + l2_norm(d_star(a)) ** 2
    return GaffneyHardyReport(lhs=lhs, rhs=rhs, fitted_constant=lhs / rhs if rhs > 0 else 0.0)


# Sweeps

_CONSTANT_NAMES = (
    "mu", "gamma", "kappa_gamma", "delta_minus", "delta_plus", "sigma_minus", "sigma_plus", "eps_p",
)


def _constant_rows(p: float, eps: float, r: float, R: float, C: float) -> List[ConstantRow]:
    try:
        constants = neck_constants(p, eps, C)
    except ParameterRangeError as exc:
        logger.warning("skipping (p=%.4f, eps=%.4f): %s", p, eps, exc)
        return []
    return [
        ConstantRow(p=p, eps=eps, r=r, R=R, name=name, value=getattr(constants, name))
        for name in _CONSTANT_NAMES
    ]


def constant_sweep(
    p_grid: Iterable[float],
    eps_grid: Iterable[float],
    r: float = 0.0,
    R: float = 1.0,
    C: float = settings.BOCHNER_C,
    workers: int = settings.PYM_WORKERS,
) -> List[ConstantRow]:
    """Constant stack over a (p, eps) grid; rows sorted by (p, eps, name)"""
    points = list(product(p_grid, eps_grid))
    logger.info("constant sweep over %d (p, eps) points", len(points))
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        batches = list(pool.map(lambda point: _constant_rows(point[0], point[1], r, R, C), points))
    rows = [row for batch in batches for row in batch]
    return sorted(rows, key=lambda row: (row.p, row.eps, row.name))


def weight_table(p: float, r: float, R: float, n: int = 64, C: float = settings.BOCHNER_C) -> List[dict]:
    """Plot-ready samples of omega_{p,R,r} and omega_{R,r} on a geometric grid"""
    radii = np.geomspace(r, R, n)
    omega_p = weight_omega(p, R, r, radii, C)
    omega_2 = weight_omega2(R, r, radii)
    return [
        {"radius": float(x), "omega_p": float(wp), "omega_2": float(w2), "bound": 2.0 / float(x) ** 2}
        for x, wp, w2 in zip(radii, omega_p, omega_2)
    ]
