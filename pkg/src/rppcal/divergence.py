"""Renyi divergences between univariate Gaussians and Gaussian mixtures.

The closed form for two Gaussians is the workhorse of the calibration
routines.  An independent numeric integrator over mixture densities backs it
up: the two never share intermediate results, which is what makes the
integrator usable as an oracle in tests and as a sufficiency check after
mixture calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError, ParamError

__all__ = [
    "GaussianPrior",
    "PrivacyTarget",
    "GaussianPair",
    "renyi_gaussian",
    "privacy_loss",
    "quadrature_divergence",
    "kl_limit_check",
]


@dataclass(frozen=True)
class GaussianPrior:
    """A univariate Gaussian N(mu, var) used as a secret-conditioned prior."""

    mu: float
    var: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ParamError(f"mean must be finite, got {self.mu}")
        if not (math.isfinite(self.var) and self.var > 0.0):
            raise ParamError(f"variance must be finite and positive, got {self.var}")


@dataclass(frozen=True)
class PrivacyTarget:
    """A privacy demand: divergence of order ``alpha`` at most ``epsilon``.

    ``tol`` is the bracket width at which the binary-search calibrator stops;
    it is measured in the same squared units as the noise variance.
    """

    alpha: float
    epsilon: float
    tol: float = 1e-9

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 1.0):
            raise ParamError(f"alpha must be finite and > 1, got {self.alpha}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ParamError(f"epsilon must be finite and positive, got {self.epsilon}")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise ParamError(f"tol must be finite and positive, got {self.tol}")


@dataclass(frozen=True)
class GaussianPair:
    """The two priors being discriminated, with their derived gaps.

    Orientation matters: ``p`` is the numerator distribution of the
    divergence and ``q`` the denominator.
    """

    p: GaussianPrior
    q: GaussianPrior

    @property
    def var_gap(self) -> float:
        """Variance gap q.var - p.var."""
        return self.q.var - self.p.var

    @property
    def mean_gap_sq(self) -> float:
        """Squared mean gap (p.mu - q.mu) ** 2."""
        return (self.p.mu - self.q.mu) ** 2

    def combined_variance(self, alpha: float) -> float:
        """The order-weighted variance (1 - alpha) * p.var + alpha * q.var.

        The divergence of order ``alpha`` exists iff this is positive once
        the noise variance is added to both priors.
        """
        return (1.0 - alpha) * self.p.var + alpha * self.q.var


def renyi_gaussian(alpha: float, p: GaussianPrior, q: GaussianPrior) -> float:
    """Closed-form Renyi divergence of order ``alpha`` from ``p`` to ``q``.

    Args:
        alpha: Divergence order, must be > 1.
        p: Numerator Gaussian.
        q: Denominator Gaussian.

    Returns:
        The divergence in nats; 0.0 exactly when the priors are identical.

    Raises:
        ParamError: If ``alpha`` <= 1.
        DomainError: If the combined variance (1 - alpha) * p.var
            + alpha * q.var is not strictly positive.
    """
    if not (math.isfinite(alpha) and alpha > 1.0):
        raise ParamError(f"alpha must be finite and > 1, got {alpha}")
    if p.mu == q.mu and p.var == q.var:
        return 0.0
    s_alpha = (1.0 - alpha) * p.var + alpha * q.var
    if s_alpha <= 0.0:
        raise DomainError(
            f"divergence undefined: (1 - alpha) * var_p + alpha * var_q = {s_alpha} <= 0"
        )
    mean_term = alpha * (p.mu - q.mu) ** 2 / (2.0 * s_alpha)
    # All variance ratios go through logs before any exponentiation so that
    # extreme alphas cannot overflow intermediate powers.
    log_term = (
        math.log(s_alpha) - (1.0 - alpha) * math.log(p.var) - alpha * math.log(q.var)
    ) / (2.0 * (1.0 - alpha))
    # Rounding can land a hair below zero for nearly identical priors.
    return max(0.0, mean_term + log_term)


def privacy_loss(theta_sq: float, alpha: float, pair: GaussianPair) -> float:
    """Divergence of order ``alpha`` after adding N(0, theta_sq) noise to both priors.

    Non-increasing in ``theta_sq`` wherever defined, which is what makes
    bracketed search for the minimal noise variance sound.

    Raises:
        ParamError: If ``theta_sq`` is negative or ``alpha`` <= 1.
        DomainError: If theta_sq + (1 - alpha) * p.var + alpha * q.var <= 0.
    """
    if not (math.isfinite(theta_sq) and theta_sq >= 0.0):
        raise ParamError(f"noise variance must be finite and >= 0, got {theta_sq}")
    noised_p = GaussianPrior(pair.p.mu, pair.p.var + theta_sq)
    noised_q = GaussianPrior(pair.q.mu, pair.q.var + theta_sq)
    return renyi_gaussian(alpha, noised_p, noised_q)


def _as_components(prior) -> list[tuple[float, float, float]]:
    """Normalise a Gaussian or mixture prior to (weight, mu, var) triples."""
    if isinstance(prior, GaussianPrior):
        return [(1.0, prior.mu, prior.var)]
    comps = getattr(prior, "components", None)
    if comps is None:
        raise ParamError(f"not a Gaussian or mixture prior: {prior!r}")
    return [(float(w), float(mu), float(var)) for (w, mu, var) in comps]


def _log_mixture_pdf(x: np.ndarray, comps: Sequence[tuple[float, float, float]]) -> np.ndarray:
    """Log density of a Gaussian mixture evaluated on an array of points."""
    rows = np.empty((len(comps), x.size))
    for r, (w, mu, var) in enumerate(comps):
        if w <= 0.0:
            rows[r] = -np.inf
            continue
        rows[r] = math.log(w) - 0.5 * math.log(2.0 * math.pi * var) - (x - mu) ** 2 / (2.0 * var)
    return logsumexp(rows, axis=0)


def quadrature_divergence(alpha: float, p, q, *, rtol: float = 1e-10) -> float:
    """Renyi divergence via numeric integration, independent of the closed form.

    Integrates p(x)^alpha * q(x)^(1-alpha) on a window wide enough that the
    endpoint integrand is negligible, entirely in the log domain, refining a
    composite Simpson rule until two successive estimates of the divergence
    agree to ``rtol`` (absolute below 1, relative above).

    Accepts single Gaussians or mixtures (anything with a ``components``
    attribute of (weight, mu, var) triples) on either side.

    Raises:
        ParamError: If ``alpha`` <= 1.
        ConvergenceError: If the estimate does not stabilise within the
            refinement budget, as happens when the integral diverges.
    """
    if not (math.isfinite(alpha) and alpha > 1.0):
        raise ParamError(f"alpha must be finite and > 1, got {alpha}")
    comps_p = _as_components(p)
    comps_q = _as_components(q)

    def log_integrand(x: np.ndarray) -> np.ndarray:
        return alpha * _log_mixture_pdf(x, comps_p) + (1.0 - alpha) * _log_mixture_pdf(x, comps_q)

    means = [mu for (_, mu, _) in comps_p + comps_q]
    spread = math.sqrt(max(var for (_, _, var) in comps_p)) + math.sqrt(
        max(var for (_, _, var) in comps_q)
    )
    lo = min(means) - 12.0 * spread
    hi = max(means) + 12.0 * spread

    # When the combined variance is nearly degenerate the integrand is far
    # wider than either density, so grow the window until its endpoints sit
    # at least e^-46 below the interior peak.
    for _ in range(64):
        probe = np.linspace(lo, hi, 257)
        g_probe = log_integrand(probe)
        peak = float(np.max(g_probe))
        if not math.isfinite(peak):
            raise ConvergenceError("integrand is not finite on the integration window")
        # Compare the drop, not the shifted level: at huge peak magnitudes
        # ``peak - 46.0`` rounds back to ``peak`` and would pass endpoints
        # that sit exactly at the peak.
        if peak - max(g_probe[0], g_probe[-1]) >= 46.0:
            break
        width = hi - lo
        lo -= 0.5 * width
        hi += 0.5 * width
    else:
        raise ConvergenceError("integrand does not decay; the divergence integral diverges")

    n = 256
    xs = np.linspace(lo, hi, n + 1)
    gs = log_integrand(xs)
    prev = None
    for _ in range(16):
        h = (hi - lo) / n
        pattern = np.full(n + 1, 2.0)
        pattern[1::2] = 4.0
        pattern[0] = pattern[-1] = 1.0
        log_integral = float(logsumexp(gs + np.log(pattern * (h / 3.0))))
        estimate = log_integral / (alpha - 1.0)
        if prev is not None and abs(estimate - prev) <= rtol * max(1.0, abs(estimate)):
            return max(0.0, estimate)
        prev = estimate
        mids = xs[:-1] + h / 2.0
        g_mids = log_integrand(mids)
        n *= 2
        merged_x = np.empty(n + 1)
        merged_g = np.empty(n + 1)
        merged_x[0::2] = xs
        merged_x[1::2] = mids
        merged_g[0::2] = gs
        merged_g[1::2] = g_mids
        xs, gs = merged_x, merged_g
    raise ConvergenceError("quadrature did not stabilise within the refinement budget")


def kl_limit_check(p: GaussianPrior, q: GaussianPrior) -> float:
    """Divergence at order 1 + 1e-5, a numeric stand-in for the KL limit."""
    return renyi_gaussian(1.0 + 1e-5, p, q)
