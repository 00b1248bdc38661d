"""Synthetic bubble data: BPST instantons, glued bubbling families and their diagnostics.

The instanton is written with the quaternion U(x) = x_4 I - i x.sigma, so that
A = Im(U^dag dU) / (|x|^2 + lambda^2) is smooth at the center and equals
(|x|^2 / (|x|^2 + lambda^2)) times the pure gauge U^dag dU / |x|^2.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    DomainMismatchError,
    NoBubbleError,
    NumericalError,
    ParameterRangeError,
    UnderResolvedError,
)
from app.models.fields import CurvatureField, GaugeField, WeightField
from app.models.instanton import (
    BubbleSpec,
    BubblingFamilySpec,
    EnergyIdentityRow,
    IndexExperimentReport,
    IndexRow,
    PScheduleReport,
    ScheduleRow,
)
from app.models.lattice import Domain
from app.models.neck import RadialSamples
from app.models.spectral import FormKind, SpectralReport
from app.services.algebra import su
from app.services.field import curvature, integrate
from app.services.functional import GradientFlowService
from app.services.lorentz import shell_measures
from app.services.neck import omega_bubble_flat, omega_eta_inf, weight_omega_eta_k
from app.services.spectral import assemble, report_from_eigenvalues, solve
from app.utils.validation import validate_positive

logger = logging.getLogger(__name__)

# Charge-one energy under <X, Y> = -2 tr(XY); the half-trace norm gives 8 pi^2
CHARGE_ONE_ENERGY = 16.0 * math.pi ** 2


# Cut-off

def cutoff(t):
    """Quintic smoothstep: 1 on [0, 1], 0 on [2, inf), C^2 in between"""
    s = np.clip(2.0 - np.asarray(t, dtype=float), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def cutoff_derivative(t):
    s = np.clip(2.0 - np.asarray(t, dtype=float), 0.0, 1.0)
    return -30.0 * s ** 2 * (1.0 - s) ** 2


# Closed forms

def bpst_energy_density(r, scale: float):
    """|F|^2 = 96 lambda^4 / (r^2 + lambda^2)^4"""
    r = np.asarray(r, dtype=float)
    return 96.0 * scale ** 4 / (r ** 2 + scale ** 2) ** 4


def bpst_ball_energy(radius: float, scale: float) -> float:
    """int_{B_radius} |F|^2 for the charge-one instanton of scale lambda"""
    a = scale ** 2
    x = radius ** 2 + a
    return CHARGE_ONE_ENERGY * (1.0 - 3.0 * a ** 2 / x ** 2 + 2.0 * a ** 3 / x ** 3)


# Lattice fields

def _relative_frame(domain: Domain, center: Sequence[float]):
    coords = domain.geometry.coords - np.asarray(center, dtype=float).reshape(4, 1, 1, 1, 1)
    y = np.moveaxis(coords, 0, -1)
    algebra = su(2)
    U = y[..., 3, None, None] * np.eye(2) + 2.0 * algebra.to_matrix(y[..., :3])
    dU = [2.0 * algebra.basis[a] for a in range(3)] + [np.eye(2, dtype=complex)]
    return U, dU, np.sum(y ** 2, axis=-1)


def _maurer_cartan(U: np.ndarray, dU: List[np.ndarray]) -> np.ndarray:
    """Im(U^dag dU_mu) per direction, shape (4, *lattice, 3)"""
    algebra = su(2)
    Udag = np.conj(np.swapaxes(U, -1, -2))
    return np.stack([algebra.from_matrix(Udag @ dU[mu]) for mu in range(4)])


def _orientation(orientation: Optional[Sequence[float]]) -> np.ndarray:
    if orientation is None:
        return np.eye(2, dtype=complex)
    return su(2).exp(np.asarray(orientation, dtype=float))


def _conjugate(values: np.ndarray, g: np.ndarray) -> np.ndarray:
    """g^-1 X g for Lie coefficients X (g unitary, broadcast over the lattice)"""
    algebra = su(2)
    gdag = np.conj(np.swapaxes(g, -1, -2))
    return algebra.from_matrix(gdag @ algebra.to_matrix(values) @ g)


def _require_su2(domain_or_field) -> None:
    dim = getattr(domain_or_field, "dim", 3)
    if dim != 3:
        raise DimensionMismatchError(f"instantons are su(2) fields, got dimension {dim}")


def bpst(domain: Domain, scale: float, center: Optional[Sequence[float]] = None,
         orientation: Optional[Sequence[float]] = None) -> GaugeField:
    """
    Regular-gauge charge-one SU(2) instanton sampled on the lattice

    Args:
        domain: Lattice domain
        scale: Instanton size lambda, at least four lattice spacings
        center: Center q (defaults to the origin)
        orientation: su(2) element g0 = exp(X); the field is g0^-1 A g0

    Raises:
        UnderResolvedError: If lambda < 4h
    """
    scale = validate_positive(scale, "scale")
    if scale < 4.0 * domain.h:
        raise UnderResolvedError(f"scale {scale} is below four lattice spacings (h={domain.h})")
    center = [0.0] * 4 if center is None else center
    U, dU, r2 = _relative_frame(domain, center)
    values = _maurer_cartan(U, dU) / (r2 + scale ** 2)[None, ..., None]
    g0 = _orientation(orientation)
    if orientation is not None:
        values = _conjugate(values, g0)
    return GaugeField.from_values(domain, values)


def pure_gauge(domain: Domain, center: Optional[Sequence[float]] = None,
               orientation: Optional[Sequence[float]] = None) -> GaugeField:
    """(g_q g0)^-1 d(g_q g0) with g_q = U/|x - q|; zero at a site sitting on q"""
    center = [0.0] * 4 if center is None else center
    U, dU, r2 = _relative_frame(domain, center)
    safe = np.where(r2 > 0.0, r2, 1.0)
    values = _maurer_cartan(U, dU) * ((r2 > 0.0) / safe)[None, ..., None]
    if orientation is not None:
        values = _conjugate(values, _orientation(orientation))
    return GaugeField.from_values(domain, values)


def glue(background: GaugeField, bubble: BubbleSpec, eta: float) -> GaugeField:
    """
    chi A_bubble + (1 - chi)(g^-1 A_background g + g^-1 dg), chi = cutoff(|x - q| / eta)

    Here g = g_q g0 is the bubble's asymptotic gauge, so outside B_{2 eta}(q) the
    result is the background in that gauge.

    Raises:
        ParameterRangeError: If the bubble scale exceeds eta / 4
    """
    _require_su2(background)
    eta = validate_positive(eta, "eta")
    if bubble.scale > eta / 4.0:
        raise ParameterRangeError(f"bubble scale {bubble.scale} exceeds eta/4 = {eta / 4.0}")
    domain = background.domain
    A_bubble = bpst(domain, bubble.scale, bubble.center, bubble.orientation).values

    U, _, r2 = _relative_frame(domain, bubble.center)
    radius = np.sqrt(r2)
    safe = np.where(radius > 0.0, radius, 1.0)[..., None, None]
    g_q = np.where(radius[..., None, None] > 0.0, U / safe, np.eye(2))
    g = g_q @ _orientation(bubble.orientation)
    outer = _conjugate(background.values, g[None]) + pure_gauge(domain, bubble.center, bubble.orientation).values

    chi = cutoff(radius / eta)[None, ..., None]
    return GaugeField.from_values(domain, chi * A_bubble + (1.0 - chi) * outer)


def glue_family(domain: Domain, family: BubblingFamilySpec, k: int,
                background: Optional[GaugeField] = None) -> GaugeField:
    """A_k: the bubbles of level k glued one after another onto the background (flat by default)"""
    A = GaugeField.flat(domain) if background is None else background
    if A.domain != domain:
        raise DomainMismatchError(f"background lives on {A.domain!r}, not on {domain!r}")
    for bubble in family.bubbles(k):
        A = glue(A, bubble, family.eta)
    return A


def singular_gauge_family(domain: Domain, family: BubblingFamilySpec, k: int) -> GaugeField:
    """
    A_k on the flat background in singular gauge around every bubble

    Each bubble contributes -chi(r/eta) lambda^2 / (r^2 + lambda^2) Im(dU U^dag) / r^2,
    which is glue(...) transformed by the bubble's asymptotic gauge. The field decays
    like lambda^2 / r^3 and vanishes outside the balls B_{2 eta}(q), so necks of bubbles
    far below the lattice spacing are sampled faithfully. Inside B_{4h}(q) the lattice
    curvature is not resolved.
    """
    algebra = su(2)
    values = np.zeros((4,) + domain.shape + (3,))
    for bubble in family.bubbles(k):
        U, dU, r2 = _relative_frame(domain, bubble.center)
        Udag = np.conj(np.swapaxes(U, -1, -2))
        right = np.stack([algebra.from_matrix(dU[mu] @ Udag) for mu in range(4)])
        profile = cutoff(np.sqrt(r2) / family.eta) * bubble.scale ** 2 / (r2 + bubble.scale ** 2)
        safe = np.where(r2 > 0.0, r2, 1.0)
        values -= right * (profile * (r2 > 0.0) / safe)[None, ..., None]
    return GaugeField.from_values(domain, values)


def curvature_energy(A: GaugeField, centered: bool = False) -> float:
    """int |F|^2 over the domain region; ``centered`` uses the second-order curvature"""
    return integrate(curvature(A, centered=centered).norm_sq, A.domain)


def detect_bubble_scale(F: CurvatureField, center: Sequence[float], eps0: float) -> float:
    """
    Smallest lattice radius delta with int_{B(q, delta)} |F|^2 >= eps0 / 2

    Raises:
        NoBubbleError: If the energy around q never reaches eps0 / 2
        UnderResolvedError: If the first lattice shell already holds eps0 / 2
    """
    eps0 = validate_positive(eps0, "eps0")
    geometry = F.domain.geometry
    offset = geometry.coords - np.asarray(center, dtype=float).reshape(4, 1, 1, 1, 1)
    radius = np.sqrt(np.sum(offset ** 2, axis=0))[geometry.region]
    energy = F.norm_sq[geometry.region] * F.domain.cell_volume
    shells, inverse = np.unique(np.round(radius, 12), return_inverse=True)
    cumulative = np.cumsum(np.bincount(inverse, weights=energy, minlength=shells.size))
    target = 0.5 * eps0
    if cumulative[-1] < target:
        raise NoBubbleError(f"energy {cumulative[-1]:.6g} near q never reaches eps0/2 = {target:.6g}")
    position = int(np.searchsorted(cumulative, target))
    if position == 0:
        raise UnderResolvedError("the innermost lattice shell already carries eps0/2")
    return float(shells[position])


# Radial profile

@dataclass(frozen=True)
class RadialBubbleProfile:
    """A = phi(r) omega_q with phi = 1 - chi(r/eta) lambda^2 / (r^2 + lambda^2).

    With eta=None the cut-off is dropped and the profile is the pure instanton.
    """

    scale: float
    eta: Optional[float] = None

    def _chi(self, r):
        return np.ones_like(r) if self.eta is None else cutoff(r / self.eta)

    def _dchi(self, r):
        return np.zeros_like(r) if self.eta is None else cutoff_derivative(r / self.eta) / self.eta

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        a = self.scale ** 2
        return (r ** 2 + (1.0 - self._chi(r)) * a) / (r ** 2 + a)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        a = self.scale ** 2
        return -self._dchi(r) * a / (r ** 2 + a) + self._chi(r) * 2.0 * r * a / (r ** 2 + a) ** 2

    def density(self, r):
        """|F|^2 = 12 phi'^2 / r^2 + 48 phi^2 (1 - phi)^2 / r^4"""
        r = np.asarray(r, dtype=float)
        a = self.scale ** 2
        phi = self.phi(r)
        complement = self._chi(r) * a / (r ** 2 + a)
        return 12.0 * self.dphi(r) ** 2 / r ** 2 + 48.0 * phi ** 2 * complement ** 2 / r ** 4

    @property
    def outer_radius(self) -> float:
        return math.inf if self.eta is None else 2.0 * self.eta

    def _breakpoints(self, upper: float) -> List[float]:
        marks = [self.scale, 4.0 * self.scale]
        if self.eta is not None:
            marks += [self.eta, 2.0 * self.eta]
        return sorted(m for m in marks if 0.0 < m < upper)

    def energy(self, radius: float, power: float = 2.0) -> float:
        """int_{B_radius} |F|^power"""
        if radius <= 0.0:
            return 0.0
        upper = min(radius, self.outer_radius)
        if math.isinf(upper):
            return CHARGE_ONE_ENERGY if power == 2.0 else math.nan
        integrand = lambda r: float(self.density(r)) ** (power / 2.0) * 2.0 * math.pi ** 2 * r ** 3
        value, _ = quad(integrand, 0.0, upper, points=self._breakpoints(upper) or None, limit=400)
        return value

    def total_energy(self) -> float:
        return self.energy(self.outer_radius)

    def detect_scale(self, eps0: float) -> float:
        """Radius where the enclosed energy reaches eps0 / 2"""
        target = 0.5 * validate_positive(eps0, "eps0")
        total = self.total_energy()
        if total < target:
            raise NoBubbleError(f"profile energy {total:.6g} never reaches eps0/2 = {target:.6g}")
        upper = self.outer_radius if math.isfinite(self.outer_radius) else 1e6 * self.scale
        return brentq(lambda rho: self.energy(rho) - target, 1e-12 * self.scale, upper, xtol=1e-14 * self.scale)

    def samples(self, r_min: float, r_max: float, shells: int = 512) -> RadialSamples:
        """|F| on geometric shells of [r_min, r_max], valued at the geometric midpoints"""
        edges = np.geomspace(r_min, r_max, shells + 1)
        mid = np.sqrt(edges[1:] * edges[:-1])
        return RadialSamples(radius=mid, value=np.sqrt(self.density(mid)), measure=shell_measures(edges))


# Family diagnostics

def energy_identity_check(family: BubblingFamilySpec, k: int, domain: Optional[Domain] = None,
                          background: Optional[GaugeField] = None) -> EnergyIdentityRow:
    """
    int |F_k|^2 against the background energy plus the energies of the limit bubbles

    The bubble terms are the charge-one energies of the rescaled limits, one per
    bubble. Given a lattice (``domain``, or the domain of ``background``), the total
    is the lattice energy of glue_family(...) and the background term is the lattice
    energy of the background on that same domain. Without one, the total integrates
    the glued radial profile over each B_{2 eta}(q_i): these balls are disjoint and
    the flat background is pure gauge outside them, so its energy term is zero.

    Raises:
        DomainMismatchError: If ``domain`` and ``background.domain`` differ
    """
    delta = family.delta(k)
    bubbles = family.bubbles(k)
    limits = [RadialBubbleProfile(bubble.scale).total_energy() for bubble in bubbles]
    if domain is None and background is None:
        method = "radial"
        total = float(sum(RadialBubbleProfile(bubble.scale, family.eta).total_energy() for bubble in bubbles))
        background_energy = 0.0
    else:
        method = "lattice"
        domain = background.domain if domain is None else domain
        background = GaugeField.flat(domain) if background is None else background
        total = curvature_energy(glue_family(domain, family, k, background))
        background_energy = curvature_energy(background)
    defect = total - background_energy - float(sum(limits))
    logger.info("energy identity (%s) k=%d: total=%.6e background=%.6e defect=%.3e",
                method, k, total, background_energy, defect)
    return EnergyIdentityRow(k=k, delta=delta, total=total, background=background_energy, bubbles=limits,
                             defect=defect, method=method)


def holder_margin(profile: RadialBubbleProfile, radius: float, p: float) -> float:
    """Relative margin of int_B |F|^2 <= (int_B |F|^p)^{2/p} vol(B)^{(p-2)/p}"""
    lhs = profile.energy(radius)
    volume = 0.5 * math.pi ** 2 * radius ** 4
    rhs = profile.energy(radius, power=p) ** (2.0 / p) * volume ** ((p - 2.0) / p)
    return (rhs - lhs) / (abs(rhs) + abs(lhs) + 1e-300)


def p_schedule_check(family: BubblingFamilySpec, bound: Optional[float] = None) -> PScheduleReport:
    """(p_k - 2) log(1/delta_k) from detected scales, with the Hoelder step of the bound"""
    bound = family.bound_B if bound is None else bound
    rows = []
    for k in sorted(family.k_values):
        delta, p = family.delta(k), family.p(k)
        profile = RadialBubbleProfile(delta, family.eta)
        detected = profile.detect_scale(family.eps0)
        margin = holder_margin(profile, detected, p)
        rows.append(
            ScheduleRow(
                k=k,
                p=p,
                delta=delta,
                detected=detected,
                product=(p - 2.0) * math.log(1.0 / detected),
                product_prescribed=(p - 2.0) * math.log(1.0 / delta),
                holder_margin=margin,
                holder_ok=margin >= -1e-12,
            )
        )
    admissible = all(row.product <= bound for row in rows)
    if not admissible:
        logger.warning("p-schedule %s exceeds B=%.3f; family inadmissible for index experiments",
                       family.schedule.value, bound)
    return PScheduleReport(bound=bound, admissible=admissible, rows=rows)


def _window(family: BubblingFamilySpec, k: int, window_factor: float, points_per_scale: float) -> Domain:
    """B_{window_factor eta} around the bubble at spacing delta_k / points_per_scale"""
    return Domain.ball(R=window_factor * family.eta, h=family.delta(k) / points_per_scale)


def _affordable_radius(spacing: float, budget: int) -> float:
    # largest R with 2 ceil(R/h) + 4 <= budget
    return max((budget - 4) // 2, 1) * spacing


def _limit_spectra(family: BubblingFamilySpec, k_first: int, window_factor: float, points_per_scale: float,
                   budget: int, n_eigen: int) -> Tuple[SpectralReport, SpectralReport, float]:
    """
    Spectra of the two limits: the flat background on B_{window_factor eta} against
    omega_{eta,inf}, and the unit instanton on the same window seen from the bubble
    chart (radius window_factor eta / delta_k at the first k) against the flat-chart
    weight. The bubble window is cut to the lattice budget when it would exceed it.
    """
    eta = family.eta
    outer = window_factor * eta
    domain = Domain.ball(R=outer, h=outer / points_per_scale)
    background_weight = WeightField(domain=domain, values=omega_eta_inf(eta, domain.geometry.radius))
    background_problem = assemble(GaugeField.flat(domain), 2.0, background_weight, FormKind.Q_CAL)
    background = solve(background_problem, min(n_eigen, background_problem.size))

    spacing = 1.0 / points_per_scale
    reach = outer / family.delta(k_first)
    chart = max(min(reach, _affordable_radius(spacing, budget)), 1.0)
    if chart < reach:
        logger.warning("bubble window cut from %.4g to %.4g by the lattice budget %d", reach, chart, budget)
    domain = Domain.ball(R=chart, h=spacing)
    bubble_weight = WeightField(domain=domain, values=omega_bubble_flat(eta, domain.geometry.radius))
    bubble_problem = assemble(bpst(domain, 1.0), 2.0, bubble_weight, FormKind.Q_CAL)
    bubble = solve(bubble_problem, min(n_eigen, bubble_problem.size))
    return background, bubble, chart


def index_semicontinuity_experiment(
    family: BubblingFamilySpec,
    k_values: Optional[Sequence[int]] = None,
    n_eigen: int = 8,
    relax_steps: int = 0,
    window_factor: float = settings.WINDOW_FACTOR,
    points_per_scale: float = settings.POINTS_PER_SCALE,
    budget: int = settings.LATTICE_BUDGET,
    workers: int = settings.PYM_WORKERS,
) -> IndexExperimentReport:
    """
    Index, nullity and extended index of Q_cal at A_k against omega_{eta,k}, compared
    with the flat background and the rescaled instanton

    Each k runs on the ball B_{window_factor eta} around the first bubble with
    spacing delta_k / points_per_scale. At window_factor >= 1 the window holds the
    bubble core and the neck delta_k/eta <= |x| <= eta; past 1 it reaches into the
    gluing annulus. Rows whose window needs more than ``budget`` sites per axis are
    reported as unresolved.
    """
    k_values = sorted(k_values if k_values is not None else family.k_values)
    background, bubble, chart = _limit_spectra(
        family, k_values[0], window_factor, points_per_scale, budget, n_eigen
    )
    flow = GradientFlowService()

    def run(k: int) -> Tuple[IndexRow, Optional[np.ndarray]]:
        delta, p = family.delta(k), family.p(k)
        domain = _window(family, k, window_factor, points_per_scale)
        row = IndexRow(k=k, p=p, delta=delta, resolved=domain.sites_per_axis <= budget,
                       sites_per_axis=domain.sites_per_axis, window_radius=domain.R)
        if not row.resolved:
            logger.warning("k=%d needs %d sites per axis (budget %d); not resolved", k, domain.sites_per_axis, budget)
            return row, None
        try:
            first = family.bubbles(k)[0]
            local = first.model_copy(update={"center": [0.0, 0.0, 0.0, 0.0]})
            A = glue(GaugeField.flat(domain), local, family.eta)
            if relax_steps:
                A = flow.run(A, p, relax_steps).field
            radius = domain.geometry.radius
            neck = domain.geometry.support & (radius >= delta / family.eta) & (radius <= family.eta)
            weight = WeightField(domain=domain, values=weight_omega_eta_k(family.eta, delta, radius))
            problem = assemble(A, p, weight, FormKind.Q_CAL)
            report = solve(problem, min(n_eigen, problem.size))
        except NumericalError as exc:
            logger.warning("k=%d failed: %s", k, exc)
            return row.model_copy(update={"error": str(exc)}), None
        row = row.model_copy(update={
            "neck_sites": int(neck.sum()),
            "dofs": problem.size,
            "index": report.index,
            "nullity": report.nullity,
            "extended_index": report.extended_index,
            "tol_zero": report.tol_zero,
            "lambda_min": report.lambda_min,
            "lower_holds": report.index >= background.index + bubble.index,
            "upper_holds": report.extended_index <= background.extended_index + bubble.extended_index,
        })
        logger.info("k=%d: index=%d nullity=%d lambda_min=%.4e", k, report.index, report.nullity, report.lambda_min)
        return row, np.asarray(report.eigenvalues)

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        results = list(pool.map(run, k_values))
    results.sort(key=lambda item: item[0].k)

    fixed_tol = next((row.tol_zero for row, _ in results if row.tol_zero is not None), None)
    rows = []
    for row, eigenvalues in results:
        if eigenvalues is not None and fixed_tol is not None:
            fixed = report_from_eigenvalues(eigenvalues, tol_zero=fixed_tol)
            row = row.model_copy(update={
                "nullity_fixed": fixed.nullity,
                "upper_holds_fixed": fixed.extended_index <= background.extended_index + bubble.extended_index,
            })
        rows.append(row)
    return IndexExperimentReport(
        eta=family.eta, background=background, bubble=bubble, bubble_window=chart, fixed_tol_zero=fixed_tol,
        relax_steps=relax_steps, rows=rows,
    )
