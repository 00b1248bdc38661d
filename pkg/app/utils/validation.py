"""Utility functions for validating physical and numerical parameters"""

import math
from typing import Optional

import numpy as np

from app.core.exceptions import ParameterRangeError


def validate_exponent(p: float, name: str = "p", allow_three: bool = False) -> float:
    """
    Validates a relaxation exponent

    Args:
        p: The exponent to validate
        name: Field name used in the error message
        allow_three: Accept the closed interval [2, 3] instead of [2, 3)

    Returns:
        float: The exponent as a float

    Raises:
        ParameterRangeError: If p lies outside the admissible interval
    """
    p = float(p)
    upper_ok = p <= 3.0 if allow_three else p < 3.0
    if not (math.isfinite(p) and p >= 2.0 and upper_ok):
        bracket = "]" if allow_three else ")"
        raise ParameterRangeError(f"{name}={p} must lie in [2, 3{bracket}")
    return p


def validate_positive(value: float, name: str) -> float:
    """
    Validates a strictly positive finite number

    Args:
        value: The number to validate
        name: Field name used in the error message

    Returns:
        float: The value as a float
    """
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise ParameterRangeError(f"{name}={value} must be positive and finite")
    return value


def validate_nonnegative(value: float, name: str) -> float:
    value = float(value)
    if not (math.isfinite(value) and value >= 0.0):
        raise ParameterRangeError(f"{name}={value} must be nonnegative and finite")
    return value


def validate_radii(r: float, R: float, ratio: float = 1.0) -> None:
    """
    Validates an annulus with inner radius r and outer radius R

    Args:
        r: Inner radius
        R: Outer radius
        ratio: Required separation, the check is 0 < ratio * r < R
    """
    validate_positive(r, "r")
    validate_positive(R, "R")
    if not ratio * r < R:
        raise ParameterRangeError(f"radii r={r}, R={R} violate 0 < {ratio:g}r < R")


def validate_in_annulus(radius: np.ndarray, r: float, R: float, rtol: float = 1e-12) -> None:
    """Raises if any sampled radius lies outside [r, R]"""
    radius = np.asarray(radius, dtype=float)
    slack = rtol * R
    if radius.size and (radius.min() < r - slack or radius.max() > R + slack):
        raise ParameterRangeError(
            f"points with |x| in [{radius.min():.6g}, {radius.max():.6g}] leave the annulus [{r}, {R}]"
        )


def validate_lorentz_exponents(P: float, Q: float) -> None:
    """
    Validates Lorentz exponents

    Args:
        P: Primary exponent, must lie in (1, inf)
        Q: Secondary exponent, must lie in (0, inf]
    """
    if not (math.isfinite(P) and P > 1.0):
        raise ParameterRangeError(f"P={P} must lie in (1, inf)")
    if not (Q > 0.0 and not math.isnan(Q)):
        raise ParameterRangeError(f"Q={Q} must lie in (0, inf]")


def validate_count(value: int, name: str, minimum: int = 1, maximum: Optional[int] = None) -> int:
    value = int(value)
    if value < minimum or (maximum is not None and value > maximum):
        upper = "" if maximum is None else f" and at most {maximum}"
        raise ParameterRangeError(f"{name}={value} must be at least {minimum}{upper}")
    return value
