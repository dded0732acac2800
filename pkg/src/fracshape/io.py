"""Reading and writing curves, paths and reports.

Curves are stored as JSON ``{"n": N, "d": d, "samples": [[x, y, ...], ...]}``
or as CSV with one row per node.  Floats are written so that reading them
back gives the identical double (shortest round-trip repr in JSON, 17
significant digits in CSV).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geodesic import PathGrid, SolveReport
from .spectral import SampledFunction

__all__ = [
    "curve_to_json",
    "curve_from_json",
    "curve_to_csv",
    "curve_from_csv",
    "load_samples",
    "save_samples",
    "path_to_json",
    "path_from_json",
    "report_to_json",
    "dumps",
]


def _clean(obj):
    """Make numpy scalars/arrays JSON serialisable."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable and explicit
        return x if np.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def curve_to_json(samples) -> str:
    x = SampledFunction(samples.x if hasattr(samples, "x") else samples).samples
    return dumps({"n": x.shape[0], "d": x.shape[1], "samples": x})


def curve_from_json(text: str) -> np.ndarray:
    """Parse curve JSON; raises ``ValueError`` (or ConfigurationError) on bad input."""
    data = json.loads(text)
    if not isinstance(data, dict) or "samples" not in data:
        raise ConfigurationError('curve JSON needs a "samples" array')
    x = np.array(data["samples"], dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ConfigurationError("samples must be a list of equal-length points")
    if "n" in data and int(data["n"]) != x.shape[0]:
        raise ConfigurationError(f'"n" = {data["n"]} but {x.shape[0]} samples given')
    if "d" in data and int(data["d"]) != x.shape[1]:
        raise ConfigurationError(f'"d" = {data["d"]} but samples have dimension {x.shape[1]}')
    return x


def curve_to_csv(samples) -> str:
    x = SampledFunction(samples.x if hasattr(samples, "x") else samples).samples
    buf = io.StringIO()
    for row in x:
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def curve_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    if not rows:
        raise ConfigurationError("empty CSV")
    try:
        x = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"non-numeric CSV entry: {exc}") from None
    return x


def load_samples(path: str | Path) -> np.ndarray:
    """Read samples from ``.json`` or ``.csv`` (decided by the suffix)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return curve_from_csv(text)
    return curve_from_json(text)


def save_samples(samples, path: str | Path) -> None:
    path = Path(path)
    text = curve_to_csv(samples) if path.suffix.lower() == ".csv" else curve_to_json(samples)
    path.write_text(text)


def path_to_json(p: PathGrid) -> str:
    return dumps({"m": p.m, "n": p.n, "d": p.d, "times": p.times, "curves": p.positions})


def path_from_json(text: str) -> PathGrid:
    data = json.loads(text)
    x = np.array(data["curves"], dtype=float)
    p = PathGrid(x)
    if int(data.get("m", p.m)) != p.m or int(data.get("n", p.n)) != p.n:
        raise ConfigurationError("path header does not match the stored curves")
    return p


def report_to_json(report: SolveReport, history: bool = False) -> str:
    return dumps(report.to_dict(history=history))
