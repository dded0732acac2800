"""Command line interface: ``fracshape {norm,distance,experiment} ...``.

Exit codes: 0 success (also when the solver did not converge), 2 input
error, 3 invariant violation, 4 internal error.  Settings are resolved as
command line flag, then ``--config`` JSON file, then built-in default; the
resolved values are written into every report header.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .curve import build_curve
from .errors import ConfigurationError, DomainError, GenerationFailure, ImmersionViolation, InnerSolveFailure
from .experiments import BENCHES, EXPERIMENTS, run_experiment
from .geodesic import solve_bvp
from .io import dumps, load_samples, path_to_json
from .metric import distance_lower_bound, gq_dot_norm, gq_norm, srv_lower_bound
from .spectral import SampledFunction, hq_dot_seminorm, hq_norm, resample

log = logging.getLogger("fracshape")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT, EXIT_INTERNAL = 0, 2, 3, 4

DEFAULTS = {
    "q": 1.0,
    "n": None,
    "m": 16,
    "seed": 0,
    "tol": 1e-6,
    "max_iter": 500,
    "jobs": 1,
    "format": "json",
    "out": None,
    "which": "composition",
    "trials": 1000,
    "levels": 3,
    "samples": 500,
}

COMMON = ("q", "n", "m", "seed", "tol", "max_iter", "jobs", "format", "out")


class InputError(Exception):
    """Unreadable or inconsistent input; maps to exit code 2."""


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--q", type=float, help=f"Sobolev order (default {DEFAULTS['q']})")
    g.add_argument("--n", type=int, help="grid size; inputs are resampled to it (default: keep the file's grid)")
    g.add_argument("--m", type=int, help=f"time slices of the geodesic path (default {DEFAULTS['m']})")
    g.add_argument("--seed", type=int, help=f"random seed (default {DEFAULTS['seed']})")
    g.add_argument("--tol", type=float, help=f"solver tolerance (default {DEFAULTS['tol']})")
    g.add_argument("--max-iter", dest="max_iter", type=int, help=f"solver iteration cap (default {DEFAULTS['max_iter']})")
    g.add_argument("--jobs", type=int, help=f"worker processes for randomized trials (default {DEFAULTS['jobs']})")
    g.add_argument("--format", choices=("json", "csv"), help=f"output format (default {DEFAULTS['format']})")
    g.add_argument("--out", help="write the report here instead of stdout")
    g.add_argument("--config", help="JSON file with default values for any of these options")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracshape",
        description="Fractional Sobolev metrics on closed curves: norms, geodesic distances, experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="norms of a sampled function or of a field along a curve")
    p.add_argument("input", help="curve or function file (.json or .csv)")
    p.add_argument("--field", help="tangent field file for a curve input (default: the position itself)")
    _add_common(p)

    p = sub.add_parser("distance", help="geodesic distance upper bound between two curves")
    p.add_argument("curve0")
    p.add_argument("curve1")
    p.add_argument("--path-out", help="also write the optimised path as JSON")
    _add_common(p)

    p = sub.add_parser("experiment", help="run a scripted experiment")
    p.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--which", help=f"bench name: {', '.join(BENCHES)} (default {DEFAULTS['which']})")
    p.add_argument("--trials", type=int, help=f"bench trials (default {DEFAULTS['trials']})")
    p.add_argument("--levels", type=int, help=f"refinement levels (default {DEFAULTS['levels']})")
    p.add_argument("--samples", type=int, help=f"ball probe samples (default {DEFAULTS['samples']})")
    _add_common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over the defaults and validate."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config file: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    def bad(msg):
        raise InputError(msg)

    try:
        cfg["q"] = float(cfg["q"])
        cfg["tol"] = float(cfg["tol"])
        for k in ("m", "seed", "max_iter", "jobs", "trials", "levels", "samples"):
            cfg[k] = int(cfg[k])
        if cfg["n"] is not None:
            cfg["n"] = int(cfg["n"])
    except (TypeError, ValueError) as exc:
        bad(f"invalid numeric option: {exc}")
    if not np.isfinite(cfg["q"]) or cfg["q"] < 0:
        bad("--q must be finite and >= 0")
    if cfg["n"] is not None and (cfg["n"] < 8 or cfg["n"] & (cfg["n"] - 1)):
        bad("--n must be a power of two >= 8")
    if cfg["m"] < 1:
        bad("--m must be >= 1")
    if not cfg["tol"] > 0:
        bad("--tol must be positive")
    for k in ("max_iter", "jobs", "trials", "levels", "samples"):
        if cfg[k] < 1:
            bad(f"--{k.replace('_', '-')} must be >= 1")
    if cfg["format"] not in ("json", "csv"):
        bad("--format must be json or csv")


def _load(path: str, n: int | None) -> np.ndarray:
    try:
        x = load_samples(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot parse {path}: {exc}") from None
    try:
        SampledFunction(x)
    except (ConfigurationError, DomainError) as exc:
        raise InputError(f"{path}: {exc}") from None
    if n is not None and n != x.shape[0]:
        x = resample(x, n)
    return x


def _table(rows: dict) -> str:
    lines = ["key,value"]
    for k, v in rows.items():
        if isinstance(v, dict):
            continue
        lines.append(f"{k},{v:.17g}" if isinstance(v, float) else f"{k},{v}")
    return "\n".join(lines) + "\n"


def _emit(text: str, cfg: dict, extra: dict[str, str] | None = None) -> None:
    if cfg["out"]:
        out = Path(cfg["out"])
        out.write_text(text)
        for suffix, body in (extra or {}).items():
            out.with_name(f"{out.stem}.{suffix}").write_text(body)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _header(command: str, cfg: dict) -> dict:
    return {"command": command, "version": __version__, "config": {k: cfg[k] for k in sorted(cfg)}}


def cmd_norm(args, cfg) -> int:
    x = _load(args.input, cfg["n"])
    q = cfg["q"]
    res = _header("norm", cfg)
    res["input"] = args.input
    if x.shape[1] == 1:
        res["kind"] = "function"
        res["hq_norm"] = hq_norm(x, q)
        res["hq_dot_seminorm"] = hq_dot_seminorm(x, q)
    else:
        c = build_curve(x)
        h = c.x if args.field is None else _load(args.field, cfg["n"])
        if h.shape != c.x.shape:
            raise InputError(f"field shape {h.shape} does not match curve {c.x.shape}")
        res["kind"] = "curve"
        res["field"] = args.field or "position"
        res["length"] = c.length
        res["hq_norm"] = hq_norm(h, q)
        res["hq_dot_seminorm"] = hq_dot_seminorm(h, q)
        res["gq_norm"] = gq_norm(c, h, q)
        res["gq_dot_norm"] = gq_dot_norm(c, h, q)
    _emit(dumps(res) if cfg["format"] == "json" else _table(res), cfg)
    return EXIT_OK


def cmd_distance(args, cfg) -> int:
    x0 = _load(args.curve0, cfg["n"])
    x1 = _load(args.curve1, cfg["n"])
    if x0.shape != x1.shape:
        raise InputError(f"curves live on different grids: {x0.shape} vs {x1.shape}")
    c0, c1 = build_curve(x0), build_curve(x1)
    q = cfg["q"]
    path, report = solve_bvp(c0, c1, q, m=cfg["m"], max_iter=cfg["max_iter"], tol=cfg["tol"])
    res = _header("distance", cfg)
    res.update(report.to_dict())
    res["lower_bound_bracket"] = distance_lower_bound(c0, c1)
    if q >= 1:
        res["srv_lower_bound"] = srv_lower_bound(c0, c1)
    if args.path_out:
        Path(args.path_out).write_text(path_to_json(path))
    if not report.converged:
        log.warning("solver did not converge: %s", report.message)
    _emit(dumps(res) if cfg["format"] == "json" else _table(res), cfg)
    return EXIT_OK


def cmd_experiment(args, cfg) -> int:
    name = args.name
    if name not in EXPERIMENTS:
        raise InputError(f"unknown experiment {name!r}; available: {', '.join(EXPERIMENTS)}")
    if name == "bench" and cfg["which"] not in BENCHES:
        raise InputError(f"unknown bench {cfg['which']!r}; available: {', '.join(BENCHES)}")
    kw = {"q": cfg["q"], "seed": cfg["seed"], "jobs": cfg["jobs"], "max_iter": cfg["max_iter"]}
    kw.update(which=cfg["which"], trials=cfg["trials"], levels=cfg["levels"], samples=cfg["samples"])
    # grid/time sizes fall back to each experiment's own defaults unless given explicitly
    if cfg["n"] is not None:
        kw["n"] = cfg["n"]
    if args.m is not None or (args.config and "m" in json.loads(Path(args.config).read_text())):
        kw["m"] = cfg["m"]
    if args.tol is not None:
        kw["tol"] = cfg["tol"]
    if name == "vanishing-distance" and args.max_iter is None:
        kw.pop("max_iter")
    report = run_experiment(name, **kw)
    log.info("%s finished in %.2f s", report.name, report.runtime)
    body = report.to_dict()
    body["header"] = _header("experiment", cfg)
    if cfg["format"] == "json":
        text = dumps(body)
    else:
        text = report.to_csv()
    plots = {f"{k}.csv": report.plot_csv(k) for k in sorted(report.plots)}
    _emit(text, cfg, plots)
    return EXIT_OK


COMMANDS = {"norm": cmd_norm, "distance": cmd_distance, "experiment": cmd_experiment}


def _setup_logging() -> None:
    level = os.environ.get("FRACSHAPE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ImmersionViolation as exc:
        msg = str(exc)
        if not msg.startswith("ImmersionViolation"):
            msg = f"ImmersionViolation: {msg}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DomainError, GenerationFailure, InnerSolveFailure) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as exc:  # pragma: no cover - last resort
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
