"""``robust-kalman`` command line.

Parameter precedence: command-line flags, then the JSON ``--config`` file,
then the built-in defaults (the 2-D tracking scenario of the benchmark).

Exit status: 0 success, 1 usage error, 2 runtime or numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import numpy as np

from . import __version__
from ._linalg import ContractViolation
from .mixture_estimation import (
    EmSettings,
    InsufficientDataError,
    effective_covariance,
    fit_gmm2,
    tg_factor,
)
from .robust_filters import TkfConfig
from .tracking_bench import FILTERS, CvModelSpec, ExperimentProtocol, run_experiment

PROG = "robust-kalman"


class UsageError(Exception):
    pass


# name -> (default, unit, help); also the set of accepted config keys
PARAMETERS: dict[str, tuple[object, str, str]] = {
    "seed": (42, "", "master random seed"),
    "runs": (500, "runs", "Monte Carlo runs"),
    "steps": (100, "steps", "time steps per run (weight-demo: steps per noise segment)"),
    "filters": ("kf,tkf,tgkf", "", "comma list of filters to run"),
    "dt": (1.0, "s", "sampling interval"),
    "p_gauss": (0.9, "probability", "weight of the small (Gaussian) noise component"),
    "var_small": (0.1, "units^2", "small-component variance per coordinate"),
    "var_big": (10.0, "units^2", "big-component variance per coordinate"),
    "grid": (None, "", "sweep grid as start:stop:step or a comma list"),
    "alpha_scale": (0.5, "units", "alpha-stable scale parameter"),
    "iters": (10, "iterations", "fixed-point iterations N per filter step"),
    "omega": (5.0, "", "prediction Student's-t dof"),
    "nu": (5.0, "", "measurement Student's-t dof"),
    "tau": (5.0, "", "inverse-Wishart tuning parameter"),
    "restarts": (5, "", "EM restarts"),
    "em_max_iters": (500, "iterations", "EM iteration cap"),
    "em_tol": (1e-8, "", "EM relative log-likelihood tolerance"),
    "legacy_h": (False, "", "observe X and Ydot instead of both positions"),
    "no_process_noise": (False, "", "simulate the truth without process noise"),
    "trajectory": (False, "", "track: emit one run's trajectories instead of RMSE"),
    "demo_q": (0.5, "units^2", "weight-demo process-noise variance"),
    "demo_var_gauss": (1.0, "units^2", "weight-demo Gaussian-segment noise variance"),
    "demo_var_impulse": (100.0, "units^2", "weight-demo impulsive-segment noise variance"),
    "input": (None, "", "gmm-fit: CSV of noise samples, one vector per row"),
    "format": ("csv", "", "output format: csv or json (gmm-fit defaults to json)"),
    "out": (None, "", "output path"),
    "jobs": (None, "processes", "worker processes"),
    "quiet": (False, "", "suppress informational diagnostics"),
}

# knobs that never reach the output file, so --jobs 1 and --jobs 8 agree byte for byte
_NOT_RECORDED = {"out", "jobs", "quiet", "format", "config"}

SUBCOMMANDS = {
    "weight-demo": ("weight_demo", ["steps", "demo_q", "demo_var_gauss", "demo_var_impulse"]),
    "track": ("rmse_vs_time", None),
    "sweep-gauss-pct": ("sweep_gauss_pct", None),
    "sweep-stddev": ("sweep_stddev", None),
    "alpha-stable": ("alpha_stable", None),
    "gmm-fit": (None, ["input", "restarts", "em_max_iters", "em_tol"]),
}
_BENCH_KEYS = [
    "runs", "steps", "filters", "dt", "p_gauss", "var_small", "var_big", "grid",
    "alpha_scale", "iters", "omega", "nu", "tau", "restarts", "em_max_iters", "em_tol",
    "legacy_h", "no_process_noise",
]
_GLOBAL_KEYS = ["seed", "out", "format", "jobs", "quiet"]


def _keys_for(sub: str) -> list[str]:
    extra = SUBCOMMANDS[sub][1]
    keys = list(_BENCH_KEYS) if extra is None else list(extra)
    if sub == "track":
        keys.append("trajectory")
    return keys


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


_SHOWN = {"grid": "per-sweep grid", "out": "stdout", "jobs": "available cores", "input": "required"}


def _help(name: str) -> str:
    default, unit, text = PARAMETERS[name]
    if name in _SHOWN:
        shown = _SHOWN[name]
    elif isinstance(default, bool):
        shown = str(default).lower()
    else:
        shown = default
    unit = f", unit: {unit}" if unit else ""
    return f"{text} (default: {shown}{unit})"


def _add(parser: argparse.ArgumentParser, name: str) -> None:
    default = PARAMETERS[name][0]
    kwargs = {"dest": name, "default": argparse.SUPPRESS, "help": _help(name)}
    if isinstance(default, bool):
        parser.add_argument(_flag(name), action="store_true", **kwargs)
    elif name == "format":
        parser.add_argument(_flag(name), choices=("csv", "json"), **kwargs)
    else:
        parser.add_argument(_flag(name), metavar=name.upper(), **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Robust Kalman filtering benchmarks (KF, TKF, TGKF).")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    descriptions = {
        "weight-demo": "A_p / A_r confidence weights of a scalar KF under Gaussian then impulsive noise",
        "track": "per-step position RMSE of each filter on the constant-velocity scenario",
        "sweep-gauss-pct": "time-averaged RMSE versus Gaussian proportion of the noise",
        "sweep-stddev": "time-averaged RMSE versus big-component standard deviation",
        "alpha-stable": "time-averaged RMSE under symmetric alpha-stable noise",
        "gmm-fit": "fit the two-component noise mixture to a CSV trace and report TG",
    }
    for sub in SUBCOMMANDS:
        sp = subs.add_parser(sub, help=descriptions[sub], description=descriptions[sub])
        sp.add_argument("--config", dest="config", default=argparse.SUPPRESS,
                        help="JSON file of parameters keyed by flag name (default: none)")
        for name in _GLOBAL_KEYS + _keys_for(sub):
            _add(sp, name)
    return parser


def _load_config(path: str, allowed: list[str]) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path!r} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path!r} must hold a JSON object")
    out = {}
    for key, value in data.items():
        name = key.lstrip("-").replace("-", "_")
        if name not in allowed:
            raise UsageError(f"unknown config key {key!r}")
        out[name] = value
    return out


def _number(name: str, value, kind=float, low=None, high=None, low_open=False):
    try:
        if isinstance(value, bool):
            raise ValueError
        x = kind(value)
        if kind is int and isinstance(value, float) and value != x:
            raise ValueError
    except (TypeError, ValueError):
        raise UsageError(f"invalid value {value!r} for {_flag(name)}") from None
    if isinstance(x, float) and not math.isfinite(x):
        raise UsageError(f"invalid value {value!r} for {_flag(name)}")
    if low is not None and (x < low or (low_open and x == low)):
        raise UsageError(f"{_flag(name)}={value} out of range")
    if high is not None and x > high:
        raise UsageError(f"{_flag(name)}={value} out of range")
    return x


def _bool(name: str, value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    raise UsageError(f"invalid value {value!r} for {_flag(name)}")


def parse_grid(text) -> tuple[float, ...]:
    """'0.1:0.9:0.1' (inclusive) or '2,4,6' or a JSON list."""
    if isinstance(text, (list, tuple)):
        return tuple(_number("grid", v) for v in text)
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"invalid value {text!r} for --grid")
        start, stop, step = (_number("grid", p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"invalid value {text!r} for --grid")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    values = tuple(_number("grid", p) for p in text.split(",") if p.strip())
    if not values:
        raise UsageError(f"invalid value {text!r} for --grid")
    return values


def _validate(params: dict) -> dict:
    """Coerce and range-check every parameter; raises UsageError naming the flag."""
    p = dict(params)
    spec = {
        "seed": (int, 0, 2**64 - 1, False),
        "runs": (int, 1, None, False),
        "steps": (int, 1, None, False),
        "dt": (float, 0.0, None, True),
        "p_gauss": (float, 0.0, 1.0, False),
        "var_small": (float, 0.0, None, True),
        "var_big": (float, 0.0, None, True),
        "alpha_scale": (float, 0.0, None, True),
        "iters": (int, 1, None, False),
        "omega": (float, 0.0, None, True),
        "nu": (float, 0.0, None, True),
        "tau": (float, 0.0, None, True),
        "restarts": (int, 1, None, False),
        "em_max_iters": (int, 1, None, False),
        "em_tol": (float, 0.0, None, True),
        "demo_q": (float, 0.0, None, False),
        "demo_var_gauss": (float, 0.0, None, True),
        "demo_var_impulse": (float, 0.0, None, True),
        "jobs": (int, 1, None, False),
    }
    for name, (kind, low, high, low_open) in spec.items():
        if name in p and p[name] is not None:
            p[name] = _number(name, p[name], kind, low, high, low_open)
    for name in ("legacy_h", "no_process_noise", "trajectory", "quiet"):
        if name in p:
            p[name] = _bool(name, p[name])
    if "filters" in p:
        names = [f.strip() for f in str(p["filters"]).split(",") if f.strip()]
        if not names:
            raise UsageError("--filters needs at least one filter")
        for f in names:
            if f not in FILTERS:
                raise UsageError(f"unknown filter {f!r} in --filters")
        p["filters"] = ",".join(names)
    if p.get("grid") is not None:
        p["grid"] = list(parse_grid(p["grid"]))
    if p.get("format", "csv") not in ("csv", "json"):
        raise UsageError(f"invalid value {p['format']!r} for --format")
    if "var_small" in p and "var_big" in p and p["var_small"] > p["var_big"]:
        raise UsageError("--var-small must not exceed --var-big")
    return p


def resolve_parameters(sub: str, flags: dict) -> dict:
    allowed = _GLOBAL_KEYS + _keys_for(sub)
    params = {k: PARAMETERS[k][0] for k in allowed}
    if sub == "gmm-fit":
        params["format"] = "json"
    if "config" in flags:
        params.update(_load_config(flags["config"], allowed))
    params.update({k: v for k, v in flags.items() if k != "config"})
    return _validate(params)


def _protocol(sub: str, p: dict) -> ExperimentProtocol:
    kind = SUBCOMMANDS[sub][0]
    if kind == "weight_demo":
        return ExperimentProtocol(
            kind=kind,
            runs=1,
            cv=CvModelSpec(steps=p["steps"]),
            demo_q=p["demo_q"],
            demo_var_gauss=p["demo_var_gauss"],
            demo_var_impulse=p["demo_var_impulse"],
        )
    if sub == "track" and p.get("trajectory"):
        kind = "trajectory"
    return ExperimentProtocol(
        kind=kind,
        runs=p["runs"],
        filters=tuple(p["filters"].split(",")),
        cv=CvModelSpec(dt=p["dt"], steps=p["steps"], legacy_h=p["legacy_h"]),
        p_gauss=p["p_gauss"],
        var_small=p["var_small"],
        var_big=p["var_big"],
        grid=None if p["grid"] is None else tuple(p["grid"]),
        alpha_scale=p["alpha_scale"],
        tkf=TkfConfig(omega=p["omega"], nu=p["nu"], tau=p["tau"], n_iters=p["iters"]),
        em=EmSettings(max_iters=p["em_max_iters"], tol=p["em_tol"], n_restarts=p["restarts"]),
        process_noise=not p["no_process_noise"],
    )


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def render(tables: dict, fmt: str) -> str:
    """Serialise ``{"columns", "rows", "metadata", "diagnostics"}`` as CSV or JSON text."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(tables["columns"])
        for row in tables["rows"]:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    doc = dict(tables.get("metadata", {}))
    doc["columns"] = list(tables["columns"])
    doc["data"] = _jsonable(tables["rows"])
    if tables.get("diagnostics"):
        doc["diagnostics"] = _jsonable(tables["diagnostics"])
    if "document" in tables:
        doc.update(_jsonable(tables["document"]))
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit_results(tables: dict, fmt: str, path: str | None) -> None:
    """Write ``tables`` to ``path`` (stdout when None); OSError names the path."""
    text = render(tables, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc.strerror}") from None


def read_noise_csv(path: str) -> np.ndarray:
    """Rows of comma-separated floats; '#' lines and a non-numeric header are skipped."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read input {path!r}: {exc.strerror}") from None
    rows = []
    for lineno, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = next(csv.reader([stripped]))
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            if not rows:
                continue  # header
            raise UsageError(f"{path}:{lineno}: non-numeric row {stripped!r}") from None
    if not rows:
        raise UsageError(f"input {path!r} holds no samples")
    if len({len(r) for r in rows}) != 1:
        raise UsageError(f"input {path!r} has rows of differing length")
    return np.array(rows)


def _metadata(sub: str, p: dict) -> dict:
    return {
        "subcommand": sub,
        "parameters": {k: v for k, v in p.items() if k not in _NOT_RECORDED},
        "seed": p["seed"],
        "version": __version__,
    }


def _gmm_tables(sub: str, p: dict) -> dict:
    if p.get("input") is None:
        raise UsageError("gmm-fit requires --input")
    samples = read_noise_csv(p["input"])
    settings = EmSettings(
        max_iters=p["em_max_iters"], tol=p["em_tol"], n_restarts=p["restarts"], seed=p["seed"]
    )
    est = fit_gmm2(samples, settings)
    result = {
        "weight_s": est.weight_s,
        "weight_b": est.weight_b,
        "mean_s": est.mean_s,
        "mean_b": est.mean_b,
        "cov_s": est.cov_s,
        "cov_b": est.cov_b,
        "tg": tg_factor(est),
        "r_effective": effective_covariance(est),
        "log_likelihood": est.log_likelihood,
        "em_iterations": len(est.log_likelihood_trace),
    }
    rows = [[k, json.dumps(_jsonable(v))] for k, v in result.items()]
    return {
        "columns": ["key", "value"],
        "rows": rows,
        "metadata": _metadata(sub, p),
        "document": result,
    }


def _bench_tables(sub: str, p: dict) -> dict:
    result = run_experiment(_protocol(sub, p), p["seed"], jobs=p.get("jobs"))
    diagnostics = {}
    if result.diverged:
        diagnostics = {
            "diverged_runs": result.diverged,
            "psd_violations": result.psd_violations,
            "max_relative_asymmetry": result.max_asymmetry,
        }
    return {
        "columns": result.columns,
        "rows": result.rows,
        "metadata": _metadata(sub, p),
        "diagnostics": diagnostics,
    }


def _diagnose(message: str) -> None:
    prefix = f"{PROG}: error:"
    if sys.stderr.isatty() and "NO_COLOR" not in os.environ:
        prefix = f"\033[31m{prefix}\033[0m"
    print(f"{prefix} {message}", file=sys.stderr)


def parse_and_dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.subcommand is None:
            raise UsageError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
        flags = {k: v for k, v in vars(ns).items() if k != "subcommand"}
        params = resolve_parameters(ns.subcommand, flags)
    except UsageError as exc:
        _diagnose(str(exc))
        return 1

    try:
        if ns.subcommand == "gmm-fit":
            tables = _gmm_tables(ns.subcommand, params)
        else:
            tables = _bench_tables(ns.subcommand, params)
        emit_results(tables, params["format"], params.get("out"))
    except UsageError as exc:
        _diagnose(str(exc))
        return 1
    except (ContractViolation, InsufficientDataError) as exc:
        _diagnose(str(exc))
        return 1
    except (OSError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        _diagnose(str(exc))
        return 2

    if not params.get("quiet"):
        diag = tables.get("diagnostics") or {}
        diverged = {k: v for k, v in diag.get("diverged_runs", {}).items() if v}
        if diverged:
            print(f"{PROG}: diverged runs excluded: {diverged}", file=sys.stderr)
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())
