"""Gaussian mixture fitting with EM and BIC model selection.

Fitting is deliberately boring: log-domain E-step, closed-form M-step, a
variance floor against collapse, k-means++-style seeding, and a fixed number
of restarts per component count.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyData, ParamError, RppError

__all__ = [
    "GmmPrior",
    "FitReport",
    "variance_floor",
    "em_fit",
    "fit_with_bic",
    "gmm_to_json_dict",
    "gmm_from_json_dict",
]

_MAX_ITER = 500
_LL_TOL = 1e-8
_RESTARTS = 5


@dataclass(frozen=True)
class GmmPrior:
    """A univariate Gaussian mixture as (weight, mu, var) triples."""

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if len(self.components) == 0:
            raise ParamError("a mixture needs at least one component")
        total = 0.0
        for w, mu, var in self.components:
            if not (math.isfinite(w) and w >= 0.0):
                raise ParamError(f"component weight must be finite and >= 0, got {w}")
            if not math.isfinite(mu):
                raise ParamError(f"component mean must be finite, got {mu}")
            if not (math.isfinite(var) and var > 0.0):
                raise ParamError(f"component variance must be finite and positive, got {var}")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ParamError(f"component weights must sum to 1, got {total}")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for (w, _, _) in self.components)


@dataclass(frozen=True)
class FitReport:
    """Provenance of a BIC-selected fit."""

    chosen_k: int
    bic_by_k: tuple[tuple[int, float], ...]
    log_likelihood: float
    n_samples: int
    em_iterations: int
    converged: bool


def variance_floor(samples: np.ndarray) -> float:
    """Smallest variance a fitted component may take for these samples."""
    spread = float(np.var(samples)) if samples.size > 1 else 0.0
    return max(1e-6, 1e-6 * spread)


def _log_resp(x, weights, mus, vars):
    """Per-component log joint densities, shape (k, n)."""
    out = np.full((len(weights), x.size), -np.inf)
    for c in range(len(weights)):
        if weights[c] <= 0.0:
            continue
        out[c] = (
            math.log(weights[c])
            - 0.5 * math.log(2.0 * math.pi * vars[c])
            - (x - mus[c]) ** 2 / (2.0 * vars[c])
        )
    return out


def _seed_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++-style center choice: spread initial centers apart."""
    centers = [float(x[rng.integers(x.size)])]
    for _ in range(1, k):
        d2 = np.min((x[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = float(d2.sum())
        if total <= 0.0:
            centers.append(float(x[rng.integers(x.size)]))
            continue
        centers.append(float(x[rng.choice(x.size, p=d2 / total)]))
    return np.asarray(centers)


@dataclass(frozen=True)
class _EmRun:
    prior: GmmPrior
    log_likelihood: float
    iterations: int
    converged: bool


def _run_em(x: np.ndarray, k: int, seed) -> _EmRun:
    n = x.size
    floor = variance_floor(x)
    if np.unique(x).size == 1:
        # Every sample identical: a single clamped component is the only
        # sensible fit no matter what k was requested.
        prior = GmmPrior(((1.0, float(x[0]), floor),))
        ll = n * (-0.5 * math.log(2.0 * math.pi * floor))
        return _EmRun(prior, ll, 0, True)

    rng = np.random.default_rng(seed)
    mus = _seed_centers(x, k, rng)
    assign = np.argmin((x[:, None] - mus[None, :]) ** 2, axis=1)
    weights = np.empty(k)
    vars = np.empty(k)
    global_var = max(float(np.var(x)), floor)
    for c in range(k):
        members = x[assign == c]
        weights[c] = max(members.size, 1) / n
        if members.size > 0:
            mus[c] = float(members.mean())
        vars[c] = max(float(members.var()), floor) if members.size > 1 else global_var
    weights /= weights.sum()

    prev_ll = -np.inf
    iterations = 0
    converged = False
    for iterations in range(1, _MAX_ITER + 1):
        log_joint = _log_resp(x, weights, mus, vars)
        log_norm = logsumexp(log_joint, axis=0)
        ll = float(log_norm.sum())
        if ll < prev_ll - 1e-9 * max(1.0, abs(ll)):
            raise RppError(
                f"log-likelihood decreased during EM ({prev_ll} -> {ll}) with k={k}"
            )
        if abs(ll - prev_ll) < _LL_TOL:
            converged = True
            break
        prev_ll = ll
        resp = np.exp(log_joint - log_norm[None, :])
        counts = resp.sum(axis=1)
        for c in range(k):
            if counts[c] < 1e-12:
                # Starved component: freeze its parameters, let its weight go.
                weights[c] = counts[c] / n
                continue
            mus[c] = float(resp[c] @ x / counts[c])
            vars[c] = max(float(resp[c] @ (x - mus[c]) ** 2 / counts[c]), floor)
            weights[c] = counts[c] / n
        weights /= weights.sum()
    if not converged:
        # The loop's last act was an M-step; reprice so the reported
        # likelihood matches the parameters actually returned.
        ll = float(logsumexp(_log_resp(x, weights, mus, vars), axis=0).sum())

    order = np.argsort(mus, kind="stable")
    comps = tuple(
        (float(weights[c]), float(mus[c]), float(vars[c])) for c in order if weights[c] > 0.0
    )
    total = sum(w for (w, _, _) in comps)
    comps = tuple((w / total, mu, var) for (w, mu, var) in comps)
    return _EmRun(GmmPrior(comps), ll, iterations, converged)


def em_fit(samples: Sequence[float], k: int, seed) -> tuple[GmmPrior, float]:
    """Fit a k-component mixture by EM; returns the prior and its log-likelihood.

    Deterministic given ``seed``.  Data whose values are all identical yields
    a single floor-variance component regardless of ``k``.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyData("cannot fit a mixture to zero samples")
    if not np.all(np.isfinite(x)):
        raise ParamError("samples must all be finite")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ParamError(f"component count must be a positive integer, got {k}")
    if x.size < k:
        raise ParamError(f"need at least k={k} samples, got {x.size}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParamError(f"seed must be a non-negative integer, got {seed}")
    run = _run_em(x, int(k), int(seed))
    return run.prior, run.log_likelihood


def fit_with_bic(samples: Sequence[float], k_max: int, seed: int) -> tuple[GmmPrior, FitReport]:
    """Fit mixtures for k = 1..k_max and keep the BIC-minimal one.

    Each k gets a fixed number of restarts with derived seeds; the candidate
    count is capped by the sample count and by the number of distinct values.
    BIC ties break toward the smaller k.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptyData("cannot fit a mixture to zero samples")
    if not np.all(np.isfinite(x)):
        raise ParamError("samples must all be finite")
    if not isinstance(k_max, (int, np.integer)) or k_max < 1:
        raise ParamError(f"k_max must be a positive integer, got {k_max}")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParamError(f"seed must be a non-negative integer, got {seed}")
    k_cap = min(int(k_max), x.size, int(np.unique(x).size))
    n = x.size

    best_by_k: list[tuple[int, float, _EmRun]] = []
    for k in range(1, k_cap + 1):
        best: _EmRun | None = None
        for r in range(_RESTARTS):
            run = _run_em(x, k, (int(seed) * 1009 + 97 * k) * _RESTARTS + r)
            if best is None or run.log_likelihood > best.log_likelihood:
                best = run
        bic = -2.0 * best.log_likelihood + (3.0 * k - 1.0) * math.log(n)
        best_by_k.append((k, bic, best))

    chosen_k, _, chosen = min(best_by_k, key=lambda item: (item[1], item[0]))
    report = FitReport(
        chosen_k=chosen_k,
        bic_by_k=tuple((k, bic) for (k, bic, _) in best_by_k),
        log_likelihood=chosen.log_likelihood,
        n_samples=n,
        em_iterations=chosen.iterations,
        converged=chosen.converged,
    )
    return chosen.prior, report


def gmm_to_json_dict(prior: GmmPrior) -> dict:
    """JSON-serialisable form: {"components": [{"w", "mu", "var"}, ...]}."""
    return {
        "components": [
            {"w": w, "mu": mu, "var": var} for (w, mu, var) in prior.components
        ]
    }


def gmm_from_json_dict(payload: dict) -> GmmPrior:
    """Inverse of :func:`gmm_to_json_dict`, validating the shape."""
    try:
        comps = tuple(
            (float(c["w"]), float(c["mu"]), float(c["var"])) for c in payload["components"]
        )
    except (KeyError, TypeError) as exc:
        raise ParamError(f"malformed mixture payload: {exc}") from exc
    return GmmPrior(comps)
