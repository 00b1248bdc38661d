"""The p-Yang-Mills energy, its variations and a gradient-flow minimizer.

All integrals are region sums h^4 sum_s. For perturbations vanishing outside
the domain support these coincide with the box pairing, so every formula
here is the exact derivative of the discrete energy.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import FlowDivergenceError, SupportError
from app.models.fields import CurvatureField, GaugeField, LatticeForm, Perturbation, ValueKind, require_same_domain
from app.models.variational import ELResidual, FlowRecord, FlowResult, GaugeKernelDefect
from app.services.algebra import form_inner, hodge_star, wedge
from app.services.field import (
    covariant_d,
    covariant_d_star,
    curvature,
    d,
    integrate,
    l2_norm,
)
from app.utils.validation import validate_exponent

logger = logging.getLogger(__name__)


def energy_density(norm_sq: np.ndarray, p: float) -> np.ndarray:
    """H = (1 + |F|^2)^{p/2}"""
    return (1.0 + norm_sq) ** (p / 2.0)


def rho(norm_sq: np.ndarray, p: float) -> np.ndarray:
    """rho_p = (1 + |F|^2)^{p/2 - 1}"""
    return (1.0 + norm_sq) ** (p / 2.0 - 1.0)


def v_kernel(omega: np.ndarray, p: float) -> np.ndarray:
    """V(w) = sqrt(rho(w)) w on vectors along the last axis"""
    norm_sq = np.sum(omega ** 2, axis=-1, keepdims=True)
    return np.sqrt(rho(norm_sq, p)) * omega


def _require_supported(a: LatticeForm) -> None:
    support = a.domain.geometry.support
    outside = np.abs(a.values[:, ~support]).max(initial=0.0)
    if outside > 0.0:
        raise SupportError(f"perturbation reaches {outside:.3e} outside the domain support")


def ym_p_energy(A: GaugeField, p: float) -> float:
    """Integral of (1 + |F_A|^2)^{p/2} over the domain region"""
    p = validate_exponent(p)
    F = curvature(A)
    return integrate(energy_density(F.norm_sq, p), A.domain)


def first_variation(A: GaugeField, a: Perturbation, p: float) -> float:
    """p * int rho <F, d_A a>"""
    p = validate_exponent(p)
    require_same_domain(A, a)
    _require_supported(a)
    F = curvature(A)
    dAa = covariant_d(A, a)
    return p * integrate(rho(F.norm_sq, p) * form_inner(F, dAa), A.domain)


def _divergence_residual(A: GaugeField, F: CurvatureField, p: float) -> LatticeForm:
    geometry = A.domain.geometry
    weighted = F.with_values(F.values * (rho(F.norm_sq, p) * geometry.region)[None, ..., None])
    R = covariant_d_star(A, weighted)
    return R.with_values(R.values * geometry.support[None, ..., None])


def el_residual(A: GaugeField, p: float) -> ELResidual:
    """d_A*(rho_p(F) F) on the support, with the non-divergence split

    rho (d_A* F - (p-2)/2 * *(d|F|^2 ^ *F) / (1 + |F|^2))

    and the L^2 defect between the two assemblies.
    """
    p = validate_exponent(p)
    F = curvature(A)
    R = _divergence_residual(A, F, p)
    geometry = A.domain.geometry

    region_F = F.with_values(F.values * geometry.region[None, ..., None])
    plain = covariant_d_star(A, region_F).values
    norm_sq_form = LatticeForm(degree=0, values=F.norm_sq[None], kind=ValueKind.REAL, domain=A.domain)
    grad_norm = d(norm_sq_form)
    twisted = hodge_star(wedge(grad_norm, hodge_star(F), "scale")).values
    weight = rho(F.norm_sq, p)[None, ..., None]
    correction = 0.5 * (p - 2.0) * twisted / (1.0 + F.norm_sq)[None, ..., None]
    split = weight * (plain - correction) * geometry.support[None, ..., None]
    nondivergence = R.with_values(split)

    norm = l2_norm(R)
    threshold = settings.FLOW_ACCEPT_FACTOR * (1.0 + l2_norm(F))
    return ELResidual(
        field=R,
        norm=norm,
        nondivergence=nondivergence,
        split_defect=l2_norm(R - nondivergence),
        acceptance_threshold=threshold,
    )


def _second_variation_parts(A: GaugeField, a: Perturbation, p: float):
    require_same_domain(A, a)
    _require_supported(a)
    F = curvature(A)
    dAa = covariant_d(A, a)
    aa = wedge(a, a, "bracket")
    return F, dAa, aa


def Q(A: GaugeField, a: Perturbation, p: float, normalized: bool = False) -> float:
    """Second variation p int rho (|d_A a|^2 + <F,[a^a]> + (p-2) <F,d_A a>^2 / (1+|F|^2)).

    ``normalized`` drops the overall factor p.
    """
    p = validate_exponent(p)
    F, dAa, aa = _second_variation_parts(A, a, p)
    pairing = form_inner(F, dAa)
    integrand = rho(F.norm_sq, p) * (
        form_inner(dAa, dAa) + form_inner(F, aa) + (p - 2.0) * pairing ** 2 / (1.0 + F.norm_sq)
    )
    value = integrate(integrand, A.domain)
    return value if normalized else p * value


def Q_bilinear(A: GaugeField, a: Perturbation, b: Perturbation, p: float, normalized: bool = False) -> float:
    """Polarization of Q"""
    return 0.25 * (Q(A, a + b, p, normalized) - Q(A, a - b, p, normalized))


def _gauge_fixing(A: GaugeField, a: Perturbation, p: float, weighted: bool = True) -> float:
    F = curvature(A)
    dstar = covariant_d_star(A, a)
    density = form_inner(dstar, dstar)
    if weighted:
        density = rho(F.norm_sq, p) * density
    return integrate(density, A.domain)


def Q_frak(A: GaugeField, a: Perturbation, p: float, normalized: bool = False) -> float:
    """Q plus the gauge-fixing term int rho |d_A* a|^2"""
    return Q(A, a, p, normalized) + _gauge_fixing(A, a, validate_exponent(p))


def Q_cal(A: GaugeField, a: Perturbation, p: float) -> float:
    """int |d_A a|^2 + |d_A* a|^2 + rho <F, [a^a]>"""
    p = validate_exponent(p)
    F, dAa, aa = _second_variation_parts(A, a, p)
    integrand = form_inner(dAa, dAa) + rho(F.norm_sq, p) * form_inner(F, aa)
    return integrate(integrand, A.domain) + _gauge_fixing(A, a, p, weighted=False)


def neck_form(A: GaugeField, a: Perturbation, p: float) -> float:
    """int rho (|d_A a|^2 + |d_A* a|^2 + <F, [a^a]>), the form bounded below in necks"""
    p = validate_exponent(p)
    F, dAa, aa = _second_variation_parts(A, a, p)
    integrand = rho(F.norm_sq, p) * (form_inner(dAa, dAa) + form_inner(F, aa))
    return integrate(integrand, A.domain) + _gauge_fixing(A, a, p)


def gauge_kernel_defect(A: GaugeField, phi: LatticeForm, p: float, factor: float = 10.0) -> GaugeKernelDefect:
    """|Q(A, d_A phi)| against factor * (residual + h) * ||d_A phi||^2"""
    direction = covariant_d(A, phi)
    a = Perturbation.from_values(A.domain, direction.values)
    residual = el_residual(A, p).norm
    norm_sq = l2_norm(a) ** 2
    defect = abs(Q(A, a, p))
    allowance = factor * (residual + A.domain.h) * norm_sq
    return GaugeKernelDefect(
        defect=defect,
        allowance=allowance,
        residual_norm=residual,
        direction_norm_sq=norm_sq,
        within_allowance=defect <= allowance,
    )


class GradientFlowService:
    """Armijo-backtracked gradient descent on YM_p along -p * residual"""

    def __init__(
        self,
        halving: float = settings.FLOW_HALVING,
        max_backtracks: int = settings.FLOW_MAX_BACKTRACKS,
        armijo: float = settings.FLOW_ARMIJO,
        accept_factor: float = settings.FLOW_ACCEPT_FACTOR,
        log_every: int = settings.FLOW_LOG_EVERY,
    ):
        self.halving = halving
        self.max_backtracks = max_backtracks
        self.armijo = armijo
        self.accept_factor = accept_factor
        self.log_every = log_every

    def _state(self, A: GaugeField, p: float) -> Tuple[float, LatticeForm, float, float]:
        F = curvature(A)
        energy = integrate(energy_density(F.norm_sq, p), A.domain)
        gradient = _divergence_residual(A, F, p) * p
        weight = rho(F.norm_sq, p) * F.norm
        initial_step = 1.0 / (1.0 + float(weight[A.domain.geometry.region].max()))
        return energy, gradient, initial_step, l2_norm(F)

    def run(self, A0: GaugeField, p: float, steps: int, target: Optional[float] = None) -> FlowResult:
        """
        Minimize YM_p starting from A0

        Args:
            A0: Initial connection
            p: Relaxation exponent
            steps: Iteration budget
            target: Residual L^2 norm at which to stop (defaults to the acceptance threshold)

        Returns:
            FlowResult with the final field and the per-iteration log

        Raises:
            FlowDivergenceError: If no step size decreases the energy
        """
        p = validate_exponent(p)
        A = A0
        energy, gradient, initial_step, curvature_norm = self._state(A, p)
        if target is None:
            target = self.accept_factor * (1.0 + curvature_norm)
        residual = l2_norm(gradient) / p
        log: List[FlowRecord] = [FlowRecord(step=0, energy=energy, residual_norm=residual, step_size=0.0)]
        logger.info("flow start: p=%.4f energy=%.10g residual=%.3e target=%.3e", p, energy, residual, target)

        previous_step: Optional[float] = None
        for step in range(1, steps + 1):
            if residual < target:
                break
            slope = l2_norm(gradient) ** 2
            tau = initial_step if previous_step is None else min(initial_step, 2.0 * previous_step)
            for _ in range(self.max_backtracks + 1):
                trial = A - gradient * tau
                trial = GaugeField.from_values(A.domain, trial.values)
                trial_energy = ym_p_energy(trial, p)
                if trial_energy <= energy - self.armijo * tau * slope:
                    break
                tau *= self.halving
            else:
                logger.warning("flow stalled at step %d: no admissible step size", step)
                raise FlowDivergenceError(
                    f"energy did not decrease after {self.max_backtracks} backtracks at step {step}",
                    log=[record.model_dump() for record in log],
                )

            A = trial
            previous_step = tau
            energy, gradient, initial_step, _ = self._state(A, p)
            residual = l2_norm(gradient) / p
            log.append(FlowRecord(step=step, energy=energy, residual_norm=residual, step_size=tau))
            if step % self.log_every == 0:
                logger.info("flow step %d: energy=%.10g residual=%.3e tau=%.3e", step, energy, residual, tau)
            else:
                logger.debug("flow step %d: energy=%.10g residual=%.3e tau=%.3e", step, energy, residual, tau)

        converged = residual < target
        logger.info("flow done after %d steps: residual=%.3e converged=%s", len(log) - 1, residual, converged)
        return FlowResult(field=A, log=log, converged=converged, target=target)
