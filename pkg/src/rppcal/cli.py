"""Command-line front end: fit, calibrate, sweep, compare.

Scenario files are TOML with keys matching :class:`rppcal.data.Scenario`.
All outputs (JSON, CSV, SVG) are pure functions of the inputs and the seed,
so rerunning a command reproduces its files byte for byte.

Exit codes: 0 on success, 1 for calibration failures, 2 for configuration
and schema problems.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .calibrate import CalibrationResult, calibrate_closed_form, calibrate_exact
from .data import (
    QueryKind,
    QuerySpec,
    Scenario,
    clamped_mean_prior,
    load_scenario,
    raw_query_prior,
    winf_baseline_theta,
)
from .divergence import GaussianPair, GaussianPrior, PrivacyTarget
from .errors import ConfigError, DataError, ParamError, RppError
from .gmm import GmmPrior, fit_with_bic, gmm_to_json_dict
from .gmm_calibrate import GmmPair, calibrate_gmm
from .svg import line_chart

__all__ = ["SweepMethod", "SweepConfig", "main"]

_SCENARIO_KEYS = {
    "dataset_path",
    "released_column",
    "sensitive_column",
    "secret_i",
    "secret_j",
}


class SweepMethod(Enum):
    EXACT = "exact"
    CLOSED_FORM = "closed_form"
    GMM = "gmm"
    BASELINE = "baseline"
    ALL = "all"


@dataclass(frozen=True)
class SweepConfig:
    """A fully validated grid request: which cells to calibrate and how."""

    epsilons: tuple[float, ...]
    alphas: tuple[float, ...]
    method: SweepMethod
    query: QuerySpec
    scenario: Scenario | None
    seed: int
    k_max: int
    output_dir: str

    def __post_init__(self):
        if len(self.epsilons) == 0:
            raise ConfigError("the epsilon grid is empty")
        for eps in self.epsilons:
            if not (math.isfinite(eps) and eps > 0.0):
                raise ConfigError(f"epsilons must be finite and positive, got {eps}")
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError(f"epsilons must be strictly ascending, got {self.epsilons}")
        if len(self.alphas) == 0:
            raise ConfigError("the alpha list is empty")
        for alpha in self.alphas:
            if not (math.isfinite(alpha) and alpha > 1.0):
                raise ConfigError(f"alphas must be finite and > 1, got {alpha}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.k_max < 1:
            raise ConfigError(f"k-max must be at least 1, got {self.k_max}")
        if self.query.kind is not QueryKind.EXTERNAL_GAUSSIAN and self.scenario is None:
            raise ConfigError(f"a {self.query.kind.value} query needs a scenario dataset")


def _applicable_methods(kind: QueryKind) -> list[SweepMethod]:
    """Methods that make sense for a query kind.

    Raw releases have mixture priors, so the single-Gaussian calibrators are
    out; external posteriors come without samples, so the quantile baseline
    is out.
    """
    if kind is QueryKind.RAW:
        return [SweepMethod.GMM, SweepMethod.BASELINE]
    if kind is QueryKind.MEAN:
        return [
            SweepMethod.EXACT,
            SweepMethod.CLOSED_FORM,
            SweepMethod.GMM,
            SweepMethod.BASELINE,
        ]
    return [SweepMethod.EXACT, SweepMethod.CLOSED_FORM, SweepMethod.GMM]


def _expand_methods(config: SweepConfig) -> list[SweepMethod]:
    applicable = _applicable_methods(config.query.kind)
    if config.method is SweepMethod.ALL:
        return applicable
    if config.method not in applicable:
        raise ConfigError(
            f"method {config.method.value!r} does not apply to a "
            f"{config.query.kind.value} query"
        )
    return [config.method]


@dataclass(frozen=True)
class _Priors:
    """Everything a grid needs, computed once per scenario and query."""

    gauss_pair: GaussianPair | None
    gmm_pair: GmmPair
    samples_i: tuple[float, ...] | None
    samples_j: tuple[float, ...] | None


def _wrap_single(prior: GaussianPrior) -> GmmPrior:
    return GmmPrior(((1.0, prior.mu, prior.var),))


def _build_priors(config: SweepConfig) -> _Priors:
    kind = config.query.kind
    if kind is QueryKind.EXTERNAL_GAUSSIAN:
        mu_i, var_i = config.query.external_params["i"]
        mu_j, var_j = config.query.external_params["j"]
        pair = GaussianPair(GaussianPrior(mu_i, var_i), GaussianPrior(mu_j, var_j))
        return _Priors(pair, GmmPair.from_priors(_wrap_single(pair.p), _wrap_single(pair.q)), None, None)
    data = load_scenario(config.scenario)
    if kind is QueryKind.MEAN:
        pair = GaussianPair(clamped_mean_prior(data.samples_i), clamped_mean_prior(data.samples_j))
        return _Priors(
            pair,
            GmmPair.from_priors(_wrap_single(pair.p), _wrap_single(pair.q)),
            data.samples_i,
            data.samples_j,
        )
    prior_i = raw_query_prior(data.samples_i, config.k_max, config.seed)
    prior_j = raw_query_prior(data.samples_j, config.k_max, config.seed)
    return _Priors(None, GmmPair.from_priors(prior_i, prior_j), data.samples_i, data.samples_j)


def _run_cell(
    priors: _Priors, method: SweepMethod, alpha: float, epsilon: float
) -> CalibrationResult:
    target = PrivacyTarget(alpha, epsilon)
    if method is SweepMethod.EXACT:
        return calibrate_exact(priors.gauss_pair, target)
    if method is SweepMethod.CLOSED_FORM:
        return calibrate_closed_form(priors.gauss_pair, target)
    if method is SweepMethod.GMM:
        return calibrate_gmm(priors.gmm_pair, target)
    return winf_baseline_theta(priors.samples_i, priors.samples_j, target)


def _run_grid(config: SweepConfig) -> list[dict]:
    """Calibrate every (alpha, method, epsilon) cell; rows come back sorted."""
    priors = _build_priors(config)
    methods = _expand_methods(config)
    cells = [
        (alpha, method, eps)
        for alpha in sorted(config.alphas)
        for method in sorted(methods, key=lambda m: m.value)
        for eps in config.epsilons
    ]

    def work(cell):
        alpha, method, eps = cell
        try:
            result = _run_cell(priors, method, alpha, eps)
        except RppError as exc:
            raise type(exc)(
                f"cell alpha={alpha} eps={eps} method={method.value}: {exc}"
            ) from exc
        return {
            "alpha": alpha,
            "epsilon": eps,
            "method": method.value,
            "theta": result.theta,
            "achieved_divergence": result.achieved_divergence,
        }

    workers = min(8, os.cpu_count() or 1, len(cells))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(work, cells))


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _sweep_csv_text(rows: list[dict]) -> str:
    lines = [["alpha", "epsilon", "method", "theta", "achieved_divergence"]]
    for row in rows:
        lines.append(
            [
                repr(row["alpha"]),
                repr(row["epsilon"]),
                row["method"],
                repr(row["theta"]),
                repr(row["achieved_divergence"]),
            ]
        )
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(lines)
    return buffer.getvalue()


def _sweep_svg_text(rows: list[dict]) -> str:
    series: dict[tuple[float, str], list[tuple[float, float]]] = {}
    for row in rows:
        series.setdefault((row["alpha"], row["method"]), []).append(
            (row["epsilon"], row["theta"])
        )
    named = [
        (f"{method} alpha={alpha:g}", sorted(points))
        for ((alpha, method), points) in sorted(series.items())
    ]
    return line_chart(
        named,
        title="Calibrated noise scale by privacy budget",
        x_label="epsilon",
        y_label="theta",
    )


def _load_scenario_file(path: str) -> Scenario:
    try:
        with open(path, "rb") as handle:
            payload = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot open scenario {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario {path!r} is not valid TOML: {exc}") from exc
    keys = set(payload)
    if keys != _SCENARIO_KEYS:
        missing = sorted(_SCENARIO_KEYS - keys)
        extra = sorted(keys - _SCENARIO_KEYS)
        detail = []
        if missing:
            detail.append(f"missing keys {missing}")
        if extra:
            detail.append(f"unknown keys {extra}")
        raise ConfigError(f"scenario {path!r}: " + "; ".join(detail))
    for key in _SCENARIO_KEYS:
        if not isinstance(payload[key], str):
            raise ConfigError(f"scenario {path!r}: key {key!r} must be a string")
    dataset = payload["dataset_path"]
    if not os.path.isabs(dataset):
        dataset = os.path.join(os.path.dirname(os.path.abspath(path)), dataset)
    try:
        return Scenario(
            dataset_path=dataset,
            released_column=payload["released_column"],
            sensitive_column=payload["sensitive_column"],
            secret_i=payload["secret_i"],
            secret_j=payload["secret_j"],
        )
    except ParamError as exc:
        raise ConfigError(f"scenario {path!r}: {exc}") from exc


def _parse_external(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects MU:VAR, got {text!r}")
    try:
        mu, var = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects numeric MU:VAR, got {text!r}") from None
    return mu, var


def _parse_eps_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--eps-grid expects START:STOP:STEP, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--eps-grid expects numeric START:STOP:STEP, got {text!r}") from None
    if step <= 0.0 or start <= 0.0 or stop < start:
        raise ConfigError(
            f"--eps-grid needs 0 < START <= STOP and STEP > 0, got {text!r}"
        )
    values = []
    index = 0
    while True:
        value = start + index * step
        if value > stop + 1e-12 * step:
            break
        values.append(value)
        index += 1
    return values


def _query_from_args(args) -> QuerySpec:
    kind = QueryKind(args.query)
    if kind is QueryKind.EXTERNAL_GAUSSIAN:
        if args.external_i is None or args.external_j is None:
            raise ConfigError("--query external needs --external-i and --external-j")
        return QuerySpec(
            kind,
            {
                "i": _parse_external(args.external_i, "--external-i"),
                "j": _parse_external(args.external_j, "--external-j"),
            },
        )
    if args.external_i is not None or args.external_j is not None:
        raise ConfigError("--external-i/--external-j only apply to --query external")
    return QuerySpec(kind)


def _config_from_args(args, *, single_eps: bool = False) -> SweepConfig:
    query = _query_from_args(args)
    scenario = None
    if args.scenario is not None:
        scenario = _load_scenario_file(args.scenario)
    if single_eps:
        epsilons = (args.eps,)
        alphas = (args.alpha,)
    else:
        if args.eps_grid is not None and args.eps:
            raise ConfigError("give either --eps values or --eps-grid, not both")
        if args.eps_grid is not None:
            epsilons = tuple(_parse_eps_grid(args.eps_grid))
        elif args.eps:
            epsilons = tuple(args.eps)
        else:
            raise ConfigError("an epsilon grid is required (--eps or --eps-grid)")
        alphas = tuple(args.alpha or [])
    try:
        method = SweepMethod(args.method.replace("-", "_"))
    except ValueError:
        raise ConfigError(f"unknown method {args.method!r}") from None
    return SweepConfig(
        epsilons=epsilons,
        alphas=alphas,
        method=method,
        query=query,
        scenario=scenario,
        seed=args.seed,
        k_max=args.k_max,
        output_dir=getattr(args, "out", None) or ".",
    )


def cmd_fit(args) -> int:
    if args.scenario is None:
        raise ConfigError("fit needs --scenario")
    scenario = _load_scenario_file(args.scenario)
    if args.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {args.seed}")
    if args.k_max < 1:
        raise ConfigError(f"k-max must be at least 1, got {args.k_max}")
    data = load_scenario(scenario)
    prior_i, report_i = fit_with_bic(data.samples_i, args.k_max, args.seed)
    prior_j, report_j = fit_with_bic(data.samples_j, args.k_max, args.seed)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "prior_i.json"), _json_text(gmm_to_json_dict(prior_i)))
    _write_text(os.path.join(args.out, "prior_j.json"), _json_text(gmm_to_json_dict(prior_j)))
    report = {
        "dropped_rows": data.dropped_rows,
        "secret_i": dataclasses.asdict(report_i),
        "secret_j": dataclasses.asdict(report_j),
    }
    _write_text(os.path.join(args.out, "fit_report.json"), _json_text(report))
    print(
        f"fitted k={report_i.chosen_k} for secret_i ({report_i.n_samples} samples), "
        f"k={report_j.chosen_k} for secret_j ({report_j.n_samples} samples)"
    )
    return 0


def cmd_calibrate(args) -> int:
    config = _config_from_args(args, single_eps=True)
    methods = _expand_methods(config)
    if len(methods) != 1:
        raise ConfigError("calibrate needs a single method, not 'all'")
    priors = _build_priors(config)
    result = _run_cell(priors, methods[0], config.alphas[0], config.epsilons[0])
    record = {
        "alpha": config.alphas[0],
        "epsilon": config.epsilons[0],
        "method": result.method.value,
        "theta": result.theta,
        "theta_sq": result.theta_sq,
        "achieved_divergence": result.achieved_divergence,
    }
    text = _json_text(record)
    print(text, end="")
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        _write_text(os.path.join(args.out, "calibrate.json"), text)
    return 0


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    rows = _run_grid(config)
    os.makedirs(config.output_dir, exist_ok=True)
    _write_text(os.path.join(config.output_dir, "sweep.csv"), _sweep_csv_text(rows))
    _write_text(os.path.join(config.output_dir, "sweep.svg"), _sweep_svg_text(rows))
    print(f"wrote {len(rows)} rows to {os.path.join(config.output_dir, 'sweep.csv')}")
    return 0


def reduction_summary(rows: list) -> dict:
    """Per-cell noise reduction of every non-baseline method against the baseline.

    Cells where either mechanism already needs no noise are reported with a
    null reduction and excluded from the mean.
    """
    baseline = {
        (row["alpha"], row["epsilon"]): row["theta"]
        for row in rows
        if row["method"] == SweepMethod.BASELINE.value
    }
    cells = []
    reductions = []
    for row in rows:
        if row["method"] == SweepMethod.BASELINE.value:
            continue
        theta_base = baseline[(row["alpha"], row["epsilon"])]
        cell = {
            "alpha": row["alpha"],
            "epsilon": row["epsilon"],
            "method": row["method"],
            "theta": row["theta"],
            "theta_baseline": theta_base,
        }
        if row["theta"] > 0.0 and theta_base > 0.0:
            cell["reduction"] = 1.0 - row["theta"] / theta_base
            reductions.append(cell["reduction"])
        else:
            cell["reduction"] = None
        cells.append(cell)
    return {
        "cells": cells,
        "compared_cells": len(reductions),
        "mean_reduction": (sum(reductions) / len(reductions)) if reductions else None,
    }


def cmd_compare(args) -> int:
    config = _config_from_args(args)
    methods = _expand_methods(config)
    if SweepMethod.BASELINE not in methods:
        raise ConfigError("compare needs the baseline method in the grid")
    ours = [m for m in methods if m is not SweepMethod.BASELINE]
    if not ours:
        raise ConfigError("compare needs at least one method besides the baseline")
    rows = _run_grid(config)
    summary = reduction_summary(rows)
    text = _json_text(summary)
    print(text, end="")
    os.makedirs(config.output_dir, exist_ok=True)
    _write_text(os.path.join(config.output_dir, "compare.json"), text)
    return 0


def _add_common(parser: argparse.ArgumentParser, *, single_eps: bool):
    parser.add_argument("--scenario", help="TOML scenario file")
    parser.add_argument(
        "--query",
        choices=[k.value for k in QueryKind],
        default=QueryKind.RAW.value,
        help="what the mechanism releases (default: raw)",
    )
    parser.add_argument("--external-i", help="MU:VAR prior for secret i (external query)")
    parser.add_argument("--external-j", help="MU:VAR prior for secret j (external query)")
    if single_eps:
        parser.add_argument("--alpha", type=float, required=True, help="divergence order")
        parser.add_argument("--eps", type=float, required=True, help="privacy budget")
    else:
        parser.add_argument(
            "--alpha",
            type=float,
            action="append",
            help="divergence order (repeatable)",
        )
        parser.add_argument(
            "--eps",
            type=float,
            action="append",
            default=[],
            help="privacy budget (repeatable, ascending)",
        )
        parser.add_argument("--eps-grid", help="START:STOP:STEP inclusive epsilon grid")
    parser.add_argument(
        "--method",
        default="all" if not single_eps else "exact",
        help="exact | closed-form | gmm | baseline" + ("" if single_eps else " | all"),
    )
    parser.add_argument("--k-max", type=int, default=8, help="largest mixture size to try")
    parser.add_argument("--seed", type=int, default=0, help="seed for mixture fitting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rppcal",
        description="Calibrate additive Gaussian noise against Renyi privacy targets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit mixture priors for both secrets")
    fit.add_argument("--scenario", required=True, help="TOML scenario file")
    fit.add_argument("--k-max", type=int, default=8, help="largest mixture size to try")
    fit.add_argument("--seed", type=int, default=0, help="seed for mixture fitting")
    fit.add_argument("--out", required=True, help="output directory")
    fit.set_defaults(func=cmd_fit)

    calibrate = sub.add_parser("calibrate", help="calibrate one (alpha, epsilon) cell")
    _add_common(calibrate, single_eps=True)
    calibrate.add_argument("--out", help="optional output directory for calibrate.json")
    calibrate.set_defaults(func=cmd_calibrate)

    sweep = sub.add_parser("sweep", help="calibrate a grid and render CSV + SVG")
    _add_common(sweep, single_eps=False)
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.set_defaults(func=cmd_sweep)

    compare = sub.add_parser("compare", help="compare calibrated noise to the baseline")
    _add_common(compare, single_eps=False)
    compare.add_argument("--out", required=True, help="output directory")
    compare.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ParamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
