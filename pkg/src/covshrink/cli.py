"""Command-line front end.

Subcommands: estimate, tune, radius-sim, rx, abtest, portfolio.  Option
precedence is flags > TOML config file > built-in defaults, and the
resolved configuration is echoed into every report for provenance.

Exit codes: 0 success, 2 input/parse/unsupported, 3 divergence-domain or
degeneracy error, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from .applications import (
    ab_synthetic_experiment,
    auc,
    radius_scaling_experiment,
    rolling_backtest,
    rx_scores,
)
from .divergences import DivergenceKind, domain_check
from .errors import (
    CovShrinkError,
    DomainError,
    InvalidInputError,
    NonConvergenceError,
    SingularMatrixError,
    UnsupportedDivergenceError,
)
from .estimator import estimate_record, lw_linear, shrink
from .io import (
    read_labeled_csv,
    read_matrix_csv,
    read_returns_csv,
    read_samples_csv,
    to_json,
    write_csv_table,
    write_json,
)
from .linalg import invert_spd
from .synthetic import sample_covariance
from .tuning import PLUGIN_KINDS, plug_in_radius

_VERSION_BANNER = (
    f"covshrink {__version__} "
    "(tolerances: phi residual 1e-12 relative; dual |F-rho| <= 1e-8*max(1,rho); "
    "symmetry 1e-12 absolute; singularity 1e-14 relative; "
    "divergence domain 1e-12 relative; portfolio KKT 1e-6)"
)

_KIND_NAMES = [k.value for k in DivergenceKind]
_PLUGIN_NAMES = [k.value for k in PLUGIN_KINDS]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (flags override it)")
    parser.add_argument("--out", "-o", help="output JSON path (default: stdout)")
    parser.add_argument("--threads", type=int, help="cap on internal parallelism")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covshrink",
        description="Joint covariance-precision estimation by divergence-ball "
                    "spectral shrinkage, with tuning and experiment harnesses.",
    )
    parser.add_argument("--version", action="version", version=_VERSION_BANNER)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="shrink a nominal covariance matrix")
    est.add_argument("input", help="CSV input (samples, or a matrix with --matrix)")
    est.add_argument("--matrix", action="store_true", default=None,
                     help="input is a p x p symmetric matrix, not samples")
    est.add_argument("--kind", choices=_KIND_NAMES)
    est.add_argument("--tau", type=float)
    est.add_argument("--rho", type=float)
    est.add_argument("--tuning", choices=["fixed", "plugin"])
    est.add_argument("--cov-mode", choices=["uncentered", "centered"])
    est.add_argument("--n", type=int, help="sample count (plugin tuning with --matrix)")
    _add_common(est)

    tune = sub.add_parser("tune", help="plug-in weight and radius for a matrix")
    tune.add_argument("input", help="CSV input (samples, or a matrix with --matrix)")
    tune.add_argument("--matrix", action="store_true", default=None)
    tune.add_argument("--kind", choices=_KIND_NAMES)
    tune.add_argument("--cov-mode", choices=["uncentered", "centered"])
    tune.add_argument("--n", type=int, help="sample count (required with --matrix)")
    _add_common(tune)

    sim = sub.add_parser("radius-sim", help="optimal-radius scaling experiment")
    sim.add_argument("--kind", choices=_PLUGIN_NAMES)
    sim.add_argument("--p", type=int)
    sim.add_argument("--n", help="sample sizes, 'start:stop:step' or comma list")
    sim.add_argument("--repeats", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--grid-points", type=int)
    sim.add_argument("--grid-min", type=float)
    sim.add_argument("--grid-max", type=float)
    sim.add_argument("--table-csv", help="also write the per-n table as CSV")
    _add_common(sim)

    rx = sub.add_parser("rx", help="Mahalanobis anomaly scores and AUC")
    rx.add_argument("input", help="CSV: feature columns plus final 0/1 label column")
    rx.add_argument("--estimator")
    rx.add_argument("--tau", type=float)
    rx.add_argument("--rho", type=float)
    rx.add_argument("--cov-mode", choices=["uncentered", "centered"])
    rx.add_argument("--no-scores", action="store_true", default=None,
                    help="omit per-pixel scores from the report")
    _add_common(rx)

    ab = sub.add_parser("abtest", help="synthetic A/B metric-learning benchmark")
    ab.add_argument("--estimator")
    ab.add_argument("--tau", type=float)
    ab.add_argument("--rho", type=float)
    ab.add_argument("--n", type=int, help="training group size")
    ab.add_argument("--features", type=int)
    ab.add_argument("--k-train", type=int)
    ab.add_argument("--k-test", type=int)
    ab.add_argument("--recognizable", type=float)
    ab.add_argument("--repeats", type=int)
    ab.add_argument("--seed", type=int)
    _add_common(ab)

    pf = sub.add_parser("portfolio", help="rolling minimum-variance backtest")
    pf.add_argument("input", help="returns CSV with a header row of asset names")
    pf.add_argument("--window", type=int)
    pf.add_argument("--estimator")
    pf.add_argument("--tau", type=float)
    pf.add_argument("--rho", type=float)
    pf.add_argument("--cov-mode", choices=["uncentered", "centered"])
    _add_common(pf)

    return parser


_DEFAULTS = {
    "estimate": {"matrix": False, "kind": "kl", "tau": None, "rho": None,
                 "tuning": "fixed", "cov_mode": "uncentered", "n": None},
    "tune": {"matrix": False, "kind": "kl", "cov_mode": "uncentered", "n": None},
    "radius-sim": {"kind": "kl", "p": 5, "n": "10:150:10", "repeats": 20,
                   "seed": 0, "grid_points": 60, "grid_min": 1e-5,
                   "grid_max": 2e3, "table_csv": None},
    "rx": {"estimator": "sample", "tau": None, "rho": None,
           "cov_mode": "uncentered", "no_scores": False},
    "abtest": {"estimator": "sample", "tau": None, "rho": None, "n": 100,
               "features": 50, "k_train": 100, "k_test": 200,
               "recognizable": 0.6, "repeats": 1, "seed": 0},
    "portfolio": {"window": 60, "estimator": "sample", "tau": None,
                  "rho": None, "cov_mode": "uncentered"},
}


def _resolve_config(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the TOML section, then explicit flags."""
    command = args.command
    cfg = dict(_DEFAULTS[command])
    cfg["out"] = None
    cfg["threads"] = 1
    if args.config:
        with open(args.config, "rb") as fh:
            filed = tomllib.load(fh)
        section = filed.get(command.replace("-", "_"), filed.get(command, {}))
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise InvalidInputError(
                    f"unknown config key {key!r} for command {command!r}"
                )
            cfg[key] = value
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            cfg[key] = value
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise InvalidInputError("--threads must be >= 1")
    return cfg


def _emit_report(report: dict, out_path) -> None:
    if out_path:
        write_json(out_path, report)
    else:
        sys.stdout.write(to_json(report))


def _echo(cfg: dict, command: str, **extra) -> dict:
    shown = {k: v for k, v in cfg.items() if k != "out"}
    shown["command"] = command
    shown.update(extra)
    return shown


def _parse_estimator_spec(spec: str):
    """Split an estimator spec like 'sstein-plugin' into (name, mode)."""
    if spec in ("sample", "lw"):
        return spec, None
    if "-" in spec:
        head, _, mode = spec.rpartition("-")
        if head in _KIND_NAMES and mode in ("plugin", "fixed"):
            return head, mode
    raise InvalidInputError(
        f"unknown estimator {spec!r}; expected 'sample', 'lw', '<kind>-plugin' "
        f"or '<kind>-fixed' with kind in {{{', '.join(_KIND_NAMES)}}}"
    )


def _check_plugin_kind(kind: DivergenceKind) -> None:
    if kind not in PLUGIN_KINDS:
        raise UnsupportedDivergenceError(
            f"Unsupported: plug-in tuning is defined only for "
            f"{', '.join(_PLUGIN_NAMES)}; got {kind.value}"
        )


def _plugin_tuning(kind: DivergenceKind, nominal: np.ndarray, n: int):
    """Plug-in weight/radius, with a floored-spectrum fallback.

    The radius constant needs a nonsingular spectrum.  For divergences that
    admit singular nominals the constant is evaluated with eigenvalues
    floored at 1e-12 of the largest, so rank-deficient sample covariances
    (n < p) still receive a small positive radius and a strictly positive
    definite estimate.
    """
    try:
        tuned = plug_in_radius(kind, nominal, n)
        return tuned.tau_star, tuned.rho_n, False
    except SingularMatrixError:
        if not domain_check(kind, nominal):
            raise
        lam, basis = np.linalg.eigh(nominal)
        lam = np.maximum(lam, 1e-12 * float(lam[-1]))
        floored = (basis * lam) @ basis.T
        tuned = plug_in_radius(kind, floored, n)
        return tuned.tau_star, tuned.rho_n, True


def _sample_estimator(cfg: dict):
    """Covariance estimator over a sample window, from an estimator spec."""
    name, mode = _parse_estimator_spec(cfg["estimator"])
    cov_mode = cfg.get("cov_mode", "uncentered")

    if name == "sample":
        return lambda x: sample_covariance(x, cov_mode)
    if name == "lw":
        return lw_linear
    kind = DivergenceKind.from_name(name)
    if mode == "plugin":
        _check_plugin_kind(kind)

        def plugin_est(x):
            s_hat = sample_covariance(x, cov_mode)
            tau, rho, _ = _plugin_tuning(kind, s_hat, x.shape[0])
            return shrink(s_hat, kind, tau, rho).sigma_star

        return plugin_est
    if cfg.get("tau") is None or cfg.get("rho") is None:
        raise InvalidInputError(f"estimator {cfg['estimator']!r} needs --tau and --rho")
    tau, rho = float(cfg["tau"]), float(cfg["rho"])

    def fixed_est(x):
        return shrink(sample_covariance(x, cov_mode), kind, tau, rho).sigma_star

    return fixed_est


def _matrix_transform(cfg: dict, n: int):
    """Covariance-matrix transform f(S) for the A/B pipeline."""
    name, mode = _parse_estimator_spec(cfg["estimator"])
    if name == "sample":
        return lambda s: s
    if name == "lw":
        raise InvalidInputError(
            "the 'lw' estimator needs raw samples and cannot be used as a "
            "matrix transform; use sample, <kind>-plugin or <kind>-fixed"
        )
    kind = DivergenceKind.from_name(name)
    if mode == "plugin":
        _check_plugin_kind(kind)

        def plugin_tf(s):
            tuned = plug_in_radius(kind, s, n)
            return shrink(s, kind, tuned.tau_star, tuned.rho_n).sigma_star

        return plugin_tf
    if cfg.get("tau") is None or cfg.get("rho") is None:
        raise InvalidInputError(f"estimator {cfg['estimator']!r} needs --tau and --rho")
    tau, rho = float(cfg["tau"]), float(cfg["rho"])
    return lambda s: shrink(s, kind, tau, rho).sigma_star


def _cmd_estimate(cfg: dict) -> int:
    kind = DivergenceKind.from_name(cfg["kind"])
    if cfg["matrix"]:
        nominal = read_matrix_csv(cfg["input"])
        n = cfg["n"]
    else:
        samples = read_samples_csv(cfg["input"])
        nominal = sample_covariance(samples, cfg["cov_mode"])
        n = samples.shape[0]
    floored = False
    if cfg["tuning"] == "plugin":
        _check_plugin_kind(kind)
        if n is None:
            raise InvalidInputError("plugin tuning with --matrix needs --n")
        tau, rho, floored = _plugin_tuning(kind, nominal, n)
    else:
        if cfg["tau"] is None or cfg["rho"] is None:
            raise InvalidInputError("fixed tuning needs explicit --tau and --rho")
        tau, rho = float(cfg["tau"]), float(cfg["rho"])
    est = shrink(nominal, kind, tau, rho)
    report = estimate_record(est)
    report["config"] = _echo(cfg, "estimate", plugin_floor_applied=floored)
    _emit_report(report, cfg["out"])
    return 0


def _cmd_tune(cfg: dict) -> int:
    kind = DivergenceKind.from_name(cfg["kind"])
    _check_plugin_kind(kind)
    if cfg["matrix"]:
        if cfg["n"] is None:
            raise InvalidInputError("tune with --matrix needs --n")
        matrix = read_matrix_csv(cfg["input"])
        n = int(cfg["n"])
    else:
        samples = read_samples_csv(cfg["input"])
        matrix = sample_covariance(samples, cfg["cov_mode"])
        n = samples.shape[0]
    tuned = plug_in_radius(kind, matrix, n)
    report = {
        "kind": tuned.kind.value,
        "n": tuned.n,
        "tau_star": tuned.tau_star,
        "target_scale": tuned.target_scale,
        "rho_star_constant": tuned.rho_star_constant,
        "rho_n": tuned.rho_n,
        "config": _echo(cfg, "tune"),
    }
    _emit_report(report, cfg["out"])
    return 0


def _parse_n_list(text: str) -> list[int]:
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"expected start:stop:step, got {text!r}")
        start, stop, step = (int(v) for v in parts)
        if step <= 0 or stop < start:
            raise InvalidInputError(f"bad range {text!r}")
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",")]


def _cmd_radius_sim(cfg: dict) -> int:
    kind = DivergenceKind.from_name(cfg["kind"])
    n_values = _parse_n_list(cfg["n"])
    grid = np.logspace(
        np.log10(float(cfg["grid_min"])),
        np.log10(float(cfg["grid_max"])),
        int(cfg["grid_points"]),
    )
    fit, rows = radius_scaling_experiment(
        kind, int(cfg["p"]), n_values, int(cfg["repeats"]), grid, int(cfg["seed"])
    )
    table = [
        {
            "n": row["n"],
            "rho_best": row["rho_best"],
            "log_n": float(np.log(row["n"])),
            "log_rho": float(np.log(row["rho_best"])),
            "mean_loss": row["mean_loss"],
        }
        for row in rows
    ]
    report = {
        "kind": kind.value,
        "p": int(cfg["p"]),
        "repeats": int(cfg["repeats"]),
        "seed": int(cfg["seed"]),
        "rows": table,
        "fit": {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
        },
        "config": _echo(cfg, "radius-sim"),
    }
    _emit_report(report, cfg["out"])
    if cfg["table_csv"]:
        write_csv_table(
            cfg["table_csv"],
            ["n", "rho_best", "log_n", "log_rho", "mean_loss"],
            [[r["n"], r["rho_best"], r["log_n"], r["log_rho"], r["mean_loss"]]
             for r in table],
        )
    return 0


def _cmd_rx(cfg: dict) -> int:
    pixels, labels = read_labeled_csv(cfg["input"])
    estimator = _sample_estimator(cfg)
    mu = pixels.mean(axis=0)
    precision = invert_spd(estimator(pixels))
    scores = rx_scores(pixels, mu, precision)
    report = {
        "n": int(pixels.shape[0]),
        "p": int(pixels.shape[1]),
        "auc": auc(scores, labels),
        "config": _echo(cfg, "rx"),
    }
    if not cfg["no_scores"]:
        report["scores"] = scores.tolist()
    _emit_report(report, cfg["out"])
    return 0


def _cmd_abtest(cfg: dict) -> int:
    n = int(cfg["n"])
    transform = _matrix_transform(cfg, n)
    repeats = int(cfg["repeats"])
    if repeats < 1:
        raise InvalidInputError("--repeats must be >= 1")
    aucs = []
    for i in range(repeats):
        result = ab_synthetic_experiment(
            n,
            transform,
            features=int(cfg["features"]),
            k_train=int(cfg["k_train"]),
            k_test=int(cfg["k_test"]),
            recognizable=float(cfg["recognizable"]),
            seed=int(cfg["seed"]) + i,
        )
        aucs.append(result["auc"])
    report = {
        "auc_mean": float(np.mean(aucs)),
        "auc_per_repeat": aucs,
        "repeats": repeats,
        "config": _echo(cfg, "abtest"),
    }
    _emit_report(report, cfg["out"])
    return 0


def _cmd_portfolio(cfg: dict) -> int:
    names, returns = read_returns_csv(cfg["input"])
    estimator = _sample_estimator(cfg)
    result = rolling_backtest(returns, int(cfg["window"]), estimator)
    report = {
        "assets": names,
        "periods": int(returns.shape[0]),
        "window": int(cfg["window"]),
        "average_return": result.average_return,
        "sharpe": result.sharpe,
        "sortino": result.sortino,
        "cumulative_return": result.cumulative_return,
        "monthly_returns": result.monthly_returns.tolist(),
        "weights_history": result.weights_history.tolist(),
        "config": _echo(cfg, "portfolio"),
    }
    _emit_report(report, cfg["out"])
    return 0


_DISPATCH = {
    "estimate": _cmd_estimate,
    "tune": _cmd_tune,
    "radius-sim": _cmd_radius_sim,
    "rx": _cmd_rx,
    "abtest": _cmd_abtest,
    "portfolio": _cmd_portfolio,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _DISPATCH[args.command](cfg)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (InvalidInputError, UnsupportedDivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CovShrinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
