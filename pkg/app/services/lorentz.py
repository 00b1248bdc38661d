"""Lorentz quasi-norms on decreasing rearrangements, integrated exactly per step."""

import logging
import math
from typing import Optional, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import DimensionMismatchError
from app.models.fields import CurvatureField
from app.models.lorentz import DualityReport, QuantizationReport, Rearrangement, SampledFunction
from app.models.neck import RadialSamples
from app.services.neck import dyadic_profile, radial_samples
from app.utils.validation import validate_lorentz_exponents, validate_radii

logger = logging.getLogger(__name__)


def rearrangement(f: SampledFunction) -> Rearrangement:
    """Sort |f| decreasingly, merging equal values into one step"""
    magnitudes = np.abs(f.values)
    levels, inverse = np.unique(-magnitudes, return_inverse=True)
    widths = np.bincount(inverse, weights=f.measures, minlength=levels.size)
    return Rearrangement(values=-levels, cumulative=np.cumsum(widths))


def distribution_function(f: SampledFunction, lam) -> np.ndarray:
    """Measure of {|f| > lam}"""
    lam = np.asarray(lam, dtype=float)
    above = np.abs(f.values)[None, :] > lam.reshape(-1, 1)
    return (above * f.measures[None, :]).sum(axis=1).reshape(lam.shape)


def lorentz_norm(f: SampledFunction, P: float, Q: float) -> float:
    """
    ||t^{1/P} f*(t)||_{L^Q(dt/t)}

    Args:
        f: Sampled function
        P: Primary exponent in (1, inf)
        Q: Secondary exponent in (0, inf], math.inf for the weak norm

    Returns:
        float: The quasi-norm
    """
    validate_lorentz_exponents(P, Q)
    steps = rearrangement(f)
    v, T = steps.values, steps.cumulative
    if math.isinf(Q):
        return float(np.max(v * T ** (1.0 / P), initial=0.0))
    previous = np.concatenate(([0.0], T[:-1]))
    total = np.sum(v ** Q * (P / Q) * (T ** (Q / P) - previous ** (Q / P)))
    return float(total ** (1.0 / Q))


def lebesgue_norm(f: SampledFunction, P: float) -> float:
    return float(np.sum(np.abs(f.values) ** P * f.measures) ** (1.0 / P))


def weak_norm_averaged(f: SampledFunction) -> float:
    """sup_t t^{1/2} f**(t), attained at a step endpoint"""
    steps = rearrangement(f)
    integral = np.cumsum(steps.values * steps.widths)
    return float(np.max(integral / np.sqrt(steps.cumulative), initial=0.0))


def duality_pairing_check(f: SampledFunction, g: SampledFunction) -> DualityReport:
    """|int f g| against ||f||_{2,1} ||g||_{2,inf} (constant 1 for these quasi-norms)"""
    if f.values.shape != g.values.shape or not np.allclose(f.measures, g.measures):
        raise DimensionMismatchError("f and g must be sampled on the same cells")
    pairing = abs(float(np.sum(f.values * g.values * f.measures)))
    bound = lorentz_norm(f, 2.0, 1.0) * lorentz_norm(g, 2.0, math.inf)
    constant = pairing / bound if bound > 0 else 0.0
    return DualityReport(pairing=pairing, bound=bound, constant=constant)


def shell_measures(edges: np.ndarray) -> np.ndarray:
    """Volumes of the 4-D shells between consecutive radii"""
    edges = np.asarray(edges, dtype=float)
    return 0.5 * math.pi ** 2 * np.diff(edges ** 4)


def restrict(samples: RadialSamples, lo: float, hi: float) -> SampledFunction:
    inside = samples.within(lo, hi)
    return SampledFunction(values=samples.value[inside], measures=samples.measure[inside])


def neck_quantization_diagnostic(
    F: Union[CurvatureField, RadialSamples],
    r: float,
    R: float,
    center: Optional[np.ndarray] = None,
    gate: float = settings.DYADIC_GATE,
) -> QuantizationReport:
    """
    L^2, L^{2,inf} and L^{2,1} curvature norms in the neck against the dyadic sup

    Args:
        F: Curvature on a lattice, or radial samples of |F|
        r: Inner radius, 0 < 4r < R
        R: Outer radius
        center: Neck center for lattice data
        gate: Threshold for the small-dyadic-energy hypothesis

    Returns:
        QuantizationReport with the norms on B_R minus B_r (L^{2,1} on B_{R/2} minus B_{2r})
    """
    validate_radii(r, R, ratio=4.0)
    samples = F if isinstance(F, RadialSamples) else radial_samples(F, center)
    dyadic = dyadic_profile(samples, r, R).sup

    outer = restrict(samples, r, R)
    inner = restrict(samples, 2.0 * r, R / 2.0)
    l2 = lebesgue_norm(outer, 2.0)
    weak = lorentz_norm(outer, 2.0, math.inf)
    l21 = lorentz_norm(inner, 2.0, 1.0)

    def ratio(value: float) -> float:
        return value / dyadic if dyadic > 0 else 0.0

    if dyadic > gate:
        logger.warning("dyadic sup %.4e exceeds the quantization gate %.4e (r=%.4g, R=%.4g)", dyadic, gate, r, R)
    return QuantizationReport(
        r=r,
        R=R,
        dyadic_sup=dyadic,
        l2=l2,
        weak_l2=weak,
        l21=l21,
        ratio_l2=ratio(l2),
        ratio_weak_l2=ratio(weak),
        ratio_l21=ratio(l21),
        gate_satisfied=dyadic <= gate,
        gate=gate,
    )


def inverse_square_profile(r0: float, R: float, shells: int = 256) -> SampledFunction:
    """|x|^-2 on r0 <= |x| <= R over geometric shells, valued at each outer edge"""
    validate_radii(r0, R)
    edges = np.geomspace(r0, R, shells + 1)
    return SampledFunction(values=edges[1:] ** -2.0, measures=shell_measures(edges))


def truncation_sequence(r0: float, radii, shells: int = 256, tol: float = settings.LORENTZ_TRUNCATION_TOL) -> dict:
    """Weak L^2 norm of |x|^-2 on growing truncations; converged when the last increment is below tol"""
    radii = sorted(float(R) for R in radii)
    norms = [lorentz_norm(inverse_square_profile(r0, R, shells), 2.0, math.inf) for R in radii]
    increments = np.diff(norms)
    return {
        "radii": radii,
        "norms": norms,
        "monotone": bool(np.all(increments >= -1e-12)),
        "converged": bool(increments.size and abs(increments[-1]) < tol),
        "limit": math.sqrt(math.pi ** 2 / 2.0),
    }
