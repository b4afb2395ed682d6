"""Dataset ingestion and query-level prior construction.

A scenario names a CSV, a released numeric column, a sensitive categorical
column, and the two secret values to discriminate.  Query helpers turn the
matched samples into priors: a single Gaussian for a mean release, a fitted
mixture for a raw release.  The quantile baseline lives here too since it
works directly on the samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .calibrate import CalibrationMethod, CalibrationResult
from .divergence import GaussianPrior, PrivacyTarget
from .errors import (
    EmptyData,
    EmptySecret,
    FileError,
    ParamError,
    SchemaError,
    TooFewSamples,
)
from .gmm import GmmPrior, fit_with_bic, variance_floor

__all__ = [
    "Scenario",
    "QueryKind",
    "QuerySpec",
    "ScenarioData",
    "load_scenario",
    "mean_query_prior",
    "clamped_mean_prior",
    "raw_query_prior",
    "winf_distance",
    "winf_baseline_theta",
]


@dataclass(frozen=True)
class Scenario:
    """Which dataset slice to compare: one released column, two secrets."""

    dataset_path: str
    released_column: str
    sensitive_column: str
    secret_i: str
    secret_j: str

    def __post_init__(self):
        if self.secret_i.strip() == self.secret_j.strip():
            raise ParamError(f"the two secrets must differ, both are {self.secret_i!r}")


class QueryKind(Enum):
    """What the mechanism releases about the column."""

    RAW = "raw"
    MEAN = "mean"
    EXTERNAL_GAUSSIAN = "external"


@dataclass(frozen=True)
class QuerySpec:
    """A query kind plus, for external posteriors, the supplied Gaussians.

    ``external_params`` maps each secret role ("i" and "j") to a (mu, var)
    pair, standing in for posteriors produced outside this library.
    """

    kind: QueryKind
    external_params: dict[str, tuple[float, float]] | None = None

    def __post_init__(self):
        if self.kind is QueryKind.EXTERNAL_GAUSSIAN:
            params = self.external_params
            if not params or set(params) != {"i", "j"}:
                raise ParamError("external queries need (mu, var) for both secrets 'i' and 'j'")
            for role, (mu, var) in params.items():
                if not (math.isfinite(mu) and math.isfinite(var) and var > 0.0):
                    raise ParamError(
                        f"external prior for secret {role!r} needs finite mu and var > 0"
                    )
        elif self.external_params is not None:
            raise ParamError(f"external parameters are meaningless for a {self.kind.value} query")


@dataclass(frozen=True)
class ScenarioData:
    """Samples matched to each secret, plus how many rows were dropped."""

    samples_i: tuple[float, ...]
    samples_j: tuple[float, ...]
    dropped_rows: int


def load_scenario(scenario: Scenario) -> ScenarioData:
    """Read the scenario's CSV and split the released column by secret.

    Matching is exact string comparison after trimming whitespace.  Rows
    whose sensitive cell is empty, or which match a secret but have an empty
    released cell, are dropped and counted.  Row order is preserved.

    Raises:
        FileError: If the file cannot be opened.
        SchemaError: If a named column is missing or a matched released cell
            is not numeric.
        EmptySecret: If either secret ends up with no samples.
    """
    secret_i = scenario.secret_i.strip()
    secret_j = scenario.secret_j.strip()
    samples_i: list[float] = []
    samples_j: list[float] = []
    dropped = 0
    try:
        handle = open(scenario.dataset_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FileError(f"cannot open dataset {scenario.dataset_path!r}: {exc}") from exc
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in (scenario.released_column, scenario.sensitive_column):
            if column not in header:
                raise SchemaError(
                    f"column {column!r} not in dataset header {header!r}"
                )
        for row in reader:
            sensitive = row.get(scenario.sensitive_column)
            released = row.get(scenario.released_column)
            if sensitive is None or sensitive.strip() == "":
                dropped += 1
                continue
            sensitive = sensitive.strip()
            if sensitive == secret_i:
                bucket = samples_i
            elif sensitive == secret_j:
                bucket = samples_j
            else:
                continue
            if released is None or released.strip() == "":
                dropped += 1
                continue
            try:
                bucket.append(float(released))
            except ValueError:
                raise SchemaError(
                    f"released column {scenario.released_column!r} has a non-numeric "
                    f"value {released!r}"
                ) from None
    if not samples_i:
        raise EmptySecret(f"no usable rows for secret {scenario.secret_i!r}")
    if not samples_j:
        raise EmptySecret(f"no usable rows for secret {scenario.secret_j!r}")
    return ScenarioData(tuple(samples_i), tuple(samples_j), dropped)


def mean_query_prior(samples: Sequence[float]) -> GaussianPrior:
    """Prior on the released mean: N(sample mean, sample variance / n).

    Uses the unbiased (n - 1) variance estimate.  Constant samples make the
    variance zero and are rejected; callers that must proceed anyway apply a
    variance floor themselves (see :func:`clamped_mean_prior`).
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise TooFewSamples(f"a mean prior needs at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParamError("samples must all be finite")
    var = float(np.var(x, ddof=1))
    return GaussianPrior(float(x.mean()), var / x.size)


def clamped_mean_prior(samples: Sequence[float]) -> GaussianPrior:
    """The mean-query prior with the mixture fitter's variance floor applied.

    This is what calibration pipelines use so that degenerate (constant)
    data still yields a valid prior instead of an error.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise TooFewSamples(f"a mean prior needs at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParamError("samples must all be finite")
    var = max(float(np.var(x, ddof=1)) / x.size, variance_floor(x))
    return GaussianPrior(float(x.mean()), var)


def raw_query_prior(samples: Sequence[float], k_max: int, seed: int) -> GmmPrior:
    """Prior on a raw release: the BIC-selected mixture fit of the samples."""
    prior, _ = fit_with_bic(samples, k_max, seed)
    return prior


def winf_distance(samples_i: Sequence[float], samples_j: Sequence[float]) -> float:
    """Largest quantile gap between the two empirical distributions.

    Quantiles are compared at the midpoint levels (k - 1/2) / n for
    n = max(len(samples_i), len(samples_j)), each resolved by nearest rank,
    so equal-sized samples compare order statistics one-to-one.
    """
    a = np.sort(np.asarray(samples_i, dtype=float))
    b = np.sort(np.asarray(samples_j, dtype=float))
    if a.size == 0 or b.size == 0:
        raise EmptyData("the quantile distance needs samples on both sides")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ParamError("samples must all be finite")
    n = max(a.size, b.size)
    levels = (np.arange(1, n + 1) - 0.5) / n
    idx_a = np.clip(np.ceil(levels * a.size).astype(int) - 1, 0, a.size - 1)
    idx_b = np.clip(np.ceil(levels * b.size).astype(int) - 1, 0, b.size - 1)
    return float(np.max(np.abs(a[idx_a] - b[idx_b])))


def winf_baseline_theta(
    samples_i: Sequence[float], samples_j: Sequence[float], target: PrivacyTarget
) -> CalibrationResult:
    """Noise variance scaled to the worst-case quantile shift between samples.

    This is the comparison baseline: theta_sq = alpha * W^2 / (2 * epsilon)
    for the largest quantile gap W.  By construction the equal-variance
    divergence at that noise level is exactly ``epsilon`` (zero when the
    samples already coincide quantile-by-quantile).
    """
    gap = winf_distance(samples_i, samples_j)
    theta_sq = target.alpha * gap * gap / (2.0 * target.epsilon)
    achieved = target.epsilon if gap > 0.0 else 0.0
    return CalibrationResult(theta_sq, CalibrationMethod.WINF_BASELINE, achieved)
