"""Minimal noise variance for a single-Gaussian pair at a divergence target.

Two routes to the answer:

* an exact bracketed binary search on the noised divergence, which is
  monotone non-increasing in the noise variance, and
* a closed form derived by relaxing the log-variance term of the divergence,
  which is cheaper and never below the exact minimum.

Results carry the achieved divergence so callers can audit sufficiency
without recomputing anything.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .divergence import GaussianPair, GaussianPrior, PrivacyTarget, privacy_loss
from .errors import ConvergenceError, ParamError

__all__ = [
    "CalibrationMethod",
    "Monotonicity",
    "CalibrationResult",
    "noise_domain_floor",
    "calibrate_exact",
    "calibrate_closed_form",
    "calibrate_symmetric",
    "relaxed_divergence_bound",
    "alpha_monotonicity_sign",
]

_DOMAIN_MARGIN = 1e-12


class CalibrationMethod(enum.Enum):
    """How a noise variance was obtained."""

    EXACT_BINARY_SEARCH = "exact_binary_search"
    CLOSED_FORM = "closed_form"
    SYMMETRIC_CLOSED_FORM = "symmetric_closed_form"
    NO_NOISE_NEEDED = "no_noise_needed"
    WINF_BASELINE = "winf_baseline"


class Monotonicity(enum.Enum):
    """Direction of the closed-form noise variance as the order alpha grows."""

    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class CalibrationResult:
    """A calibrated noise variance and the divergence it actually attains.

    ``bracket_width_final`` is populated only by the binary-search route and
    records the terminal bracket width (at most the target tolerance).
    """

    theta_sq: float
    method: CalibrationMethod
    achieved_divergence: float
    bracket_width_final: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.theta_sq) and self.theta_sq >= 0.0):
            raise ParamError(f"calibrated variance must be finite and >= 0, got {self.theta_sq}")

    @property
    def theta(self) -> float:
        """Noise standard deviation."""
        return math.sqrt(self.theta_sq)


def noise_domain_floor(pair: GaussianPair, alpha: float) -> float:
    """Smallest admissible noise variance for the pair at order ``alpha``.

    Zero when the divergence already exists at zero noise; otherwise just
    above the variance at which the combined variance changes sign.
    """
    a = pair.combined_variance(alpha)
    if a > 0.0:
        return 0.0
    return -a + _DOMAIN_MARGIN


def calibrate_exact(pair: GaussianPair, target: PrivacyTarget) -> CalibrationResult:
    """Minimal noise variance meeting the target, by bracketed binary search.

    The search halves [L, R] with the loss above target at L and at most the
    target at R, and returns R once the bracket is narrower than
    ``target.tol``, so the result errs on the sufficient side.

    Returns a NO_NOISE_NEEDED result when the loss at the domain floor is
    already within the target.
    """
    alpha, eps = target.alpha, target.epsilon
    floor = noise_domain_floor(pair, alpha)
    g_floor = privacy_loss(floor, alpha, pair)
    if g_floor <= eps:
        return CalibrationResult(floor, CalibrationMethod.NO_NOISE_NEEDED, g_floor)

    upper = floor + max(_closed_form_theta_sq(pair, target), 1.0)
    for _ in range(200):
        if privacy_loss(upper, alpha, pair) <= eps:
            break
        upper *= 2.0
    else:
        raise ConvergenceError("could not bracket the target from above")

    lo, hi = floor, upper
    while hi - lo > target.tol:
        mid = 0.5 * (lo + hi)
        if privacy_loss(mid, alpha, pair) > eps:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(
        hi,
        CalibrationMethod.EXACT_BINARY_SEARCH,
        privacy_loss(hi, alpha, pair),
        bracket_width_final=hi - lo,
    )


def _closed_form_theta_sq(pair: GaussianPair, target: PrivacyTarget) -> float:
    """Unclamped closed-form noise variance (may be negative)."""
    alpha, eps = target.alpha, target.epsilon
    gap = pair.mean_gap_sq
    d = pair.var_gap
    lin = gap - 2.0 * eps * d
    disc = lin * lin + 8.0 * eps * d * d / (alpha - 1.0)
    return alpha / (4.0 * eps) * (lin + math.sqrt(disc)) - pair.p.var


def calibrate_closed_form(pair: GaussianPair, target: PrivacyTarget) -> CalibrationResult:
    """Closed-form sufficient noise variance for the pair.

    Solves the relaxed divergence bound for equality and clamps at zero, so
    the result always meets the target and never falls below the exact
    minimum.
    """
    raw = _closed_form_theta_sq(pair, target)
    if raw <= 0.0:
        return CalibrationResult(
            0.0,
            CalibrationMethod.NO_NOISE_NEEDED,
            privacy_loss(0.0, target.alpha, pair),
        )
    return CalibrationResult(
        raw,
        CalibrationMethod.CLOSED_FORM,
        privacy_loss(raw, target.alpha, pair),
    )


def calibrate_symmetric(mean_gap_sq: float, var: float, target: PrivacyTarget) -> CalibrationResult:
    """Closed-form noise variance when both priors share the variance ``var``.

    The equal-variance divergence is alpha * gap / (2 * (var + theta_sq)),
    inverted directly; clamps at zero when no noise is needed.
    """
    if not (math.isfinite(mean_gap_sq) and mean_gap_sq >= 0.0):
        raise ParamError(f"squared mean gap must be finite and >= 0, got {mean_gap_sq}")
    if not (math.isfinite(var) and var > 0.0):
        raise ParamError(f"shared variance must be finite and positive, got {var}")
    theta_sq = max(0.0, target.alpha * mean_gap_sq / (2.0 * target.epsilon) - var)
    achieved = target.alpha * mean_gap_sq / (2.0 * (var + theta_sq))
    method = (
        CalibrationMethod.NO_NOISE_NEEDED
        if theta_sq == 0.0
        else CalibrationMethod.SYMMETRIC_CLOSED_FORM
    )
    return CalibrationResult(theta_sq, method, achieved)


def relaxed_divergence_bound(theta_sq: float, alpha: float, pair: GaussianPair) -> float:
    """Upper bound on the noised divergence with the log-variance term relaxed.

    This is the bound the closed-form calibrator inverts: the exact mean term
    plus a linearised variance term.  Defined on the same noise domain as the
    divergence itself.
    """
    if not (math.isfinite(alpha) and alpha > 1.0):
        raise ParamError(f"alpha must be finite and > 1, got {alpha}")
    if not (math.isfinite(theta_sq) and theta_sq >= 0.0):
        raise ParamError(f"noise variance must be finite and >= 0, got {theta_sq}")
    x = pair.p.var + theta_sq
    den = theta_sq + pair.combined_variance(alpha)
    if den <= 0.0:
        raise ParamError(
            f"bound undefined: theta_sq + (1 - alpha) * var_p + alpha * var_q = {den} <= 0"
        )
    d = pair.var_gap
    return alpha * pair.mean_gap_sq / (2.0 * den) + alpha * alpha * d * d / (
        2.0 * (alpha - 1.0) * x * den
    )


def alpha_monotonicity_sign(pair: GaussianPair, epsilon: float, alpha: float) -> Monotonicity:
    """Whether the closed-form noise variance grows or shrinks with the order.

    Evaluated at the given (epsilon, alpha); the boundary case (equality in
    the defining inequality) is classified as DECREASING.
    """
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise ParamError(f"epsilon must be finite and positive, got {epsilon}")
    if not (math.isfinite(alpha) and alpha > 1.0):
        raise ParamError(f"alpha must be finite and > 1, got {alpha}")
    d = pair.var_gap
    threshold = 2.0 * epsilon * d + (2.0 - alpha) / (alpha - 1.0) * math.sqrt(2.0 * epsilon) * abs(d)
    if pair.mean_gap_sq > threshold:
        return Monotonicity.INCREASING
    return Monotonicity.DECREASING
