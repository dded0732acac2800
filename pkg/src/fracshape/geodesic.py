"""Discrete path energies, geodesic boundary value solver and exponential map.

A path is stored as node values ``(M + 1, N, d)`` at uniform times.  Slice
``m`` is the segment between ``c_m`` and ``c_{m+1}``; its metric is evaluated
at the pointwise midpoint curve with the finite-difference velocity, so that

    E = sum_m dt * G^q_{(c_m + c_{m+1})/2}((c_{m+1} - c_m)/dt, same)
    L = sum_m dt * sqrt(G^q_{...}(...))
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .curve import IMMERSION_EPS, DiscreteCurve, TangentField, build_curve
from .errors import ConfigurationError, DomainError, ImmersionViolation, InnerSolveFailure
from .metric import slice_energy
from .optim import lbfgs
from .spectral import SampledFunction, frequencies

log = logging.getLogger(__name__)

__all__ = [
    "PathGrid",
    "SolveReport",
    "linear_path",
    "initial_path",
    "path_energy",
    "path_length",
    "slice_energies",
    "energy_gradient",
    "solve_bvp",
    "refine_path",
    "discrete_exp",
    "energy_drift",
]


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Curves ``c_0 .. c_M`` at the times ``m / M``."""

    positions: np.ndarray
    endpoints_fixed: bool = True

    def __post_init__(self) -> None:
        x = np.array(self.positions, dtype=float)
        if x.ndim != 3 or x.shape[0] < 2:
            raise ConfigurationError(f"path positions must have shape (M+1, N, d), got {x.shape}")
        SampledFunction(x[0])  # grid checks
        if not np.all(np.isfinite(x)):
            raise DomainError("path positions must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)

    @property
    def m(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    @property
    def d(self) -> int:
        return self.positions.shape[2]

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    @property
    def dt(self) -> float:
        return 1.0 / self.m

    def curve(self, i: int) -> DiscreteCurve:
        return build_curve(self.positions[i])

    @property
    def curves(self) -> list[DiscreteCurve]:
        return [self.curve(i) for i in range(self.m + 1)]

    def with_interior(self, interior: np.ndarray) -> "PathGrid":
        x = self.positions.copy()
        x[1:-1] = interior
        return PathGrid(x, self.endpoints_fixed)


@dataclass
class SolveReport:
    distance_upper_bound: float
    energy: float
    iterations: int
    converged: bool
    min_speed_along_path: float
    min_length_along_path: float
    message: str = ""
    energy_history: list[float] = field(default_factory=list, repr=False)

    def to_dict(self, history: bool = False) -> dict:
        out = asdict(self)
        if not history:
            out.pop("energy_history")
        return out


def _positions(p) -> np.ndarray:
    return p.positions if isinstance(p, PathGrid) else np.asarray(p, dtype=float)


def _slices(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    m = x.shape[0] - 1
    dt = 1.0 / m
    return 0.5 * (x[1:] + x[:-1]), (x[1:] - x[:-1]) / dt, dt


def slice_energies(p: PathGrid | np.ndarray, q: float) -> np.ndarray:
    """Metric value ``G^q(cdot, cdot)`` on each of the M segments."""
    mid, vel, _ = _slices(_positions(p))
    return slice_energy(mid, vel, q)


def path_energy(p: PathGrid | np.ndarray, q: float) -> float:
    """Discrete energy ``sum_m dt G^q_{mid}(vel, vel)``."""
    x = _positions(p)
    return float(np.sum(slice_energies(x, q)) / (x.shape[0] - 1))


def path_length(p: PathGrid | np.ndarray, q: float) -> float:
    """Discrete length ``sum_m dt sqrt(G^q_{mid}(vel, vel))``."""
    x = _positions(p)
    e = slice_energies(x, q)
    return float(np.sum(np.sqrt(np.maximum(e, 0.0))) / (x.shape[0] - 1))


def _energy_and_gradient(x: np.ndarray, q: float) -> tuple[float, np.ndarray]:
    mid, vel, dt = _slices(x)
    e, dmid, dvel = slice_energy(mid, vel, q, grad=True)
    g = np.zeros_like(x)
    # d/dc_m of dt * e_m(mid, vel) and dt * e_{m-1}
    g[:-1] += dt * 0.5 * dmid - dvel
    g[1:] += dt * 0.5 * dmid + dvel
    return float(dt * np.sum(e)), g


def energy_gradient(p: PathGrid | np.ndarray, q: float) -> np.ndarray:
    """Gradient of :func:`path_energy` with respect to the interior nodes, shape (M-1, N, d)."""
    return _energy_and_gradient(_positions(p), q)[1][1:-1]


def linear_path(c0, c1, m: int) -> np.ndarray:
    x0 = c0.x if isinstance(c0, DiscreteCurve) else np.asarray(c0, dtype=float)
    x1 = c1.x if isinstance(c1, DiscreteCurve) else np.asarray(c1, dtype=float)
    t = np.linspace(0.0, 1.0, m + 1)[:, None, None]
    return (1 - t) * x0[None] + t * x1[None]


def _path_immersed(x: np.ndarray, q: float) -> bool:
    try:
        slice_energies(x, q)
        for xi in x:
            build_curve(xi)
    except ImmersionViolation:
        return False
    return True


def initial_path(c0: DiscreteCurve, c1: DiscreteCurve, m: int, q: float = 1.0) -> np.ndarray:
    """Linear interpolation, lifted by a growing circle bump if it leaves Imm.

    The lift adds ``beta * sin(pi t) * R (cos, sin)`` with ``R`` the larger
    of the two radii of gyration, doubling ``beta`` until every slice and every
    midpoint curve is immersed.
    """
    x = linear_path(c0, c1, m)
    if _path_immersed(x, q):
        return x
    n = c0.n
    th = np.arange(n) / n
    bump = np.zeros_like(c0.x)
    radius = max(np.sqrt(np.mean(np.sum((c.x - c.x.mean(0)) ** 2, axis=1))) for c in (c0, c1))
    bump[:, 0] = radius * np.cos(2 * np.pi * th)
    bump[:, 1] = radius * np.sin(2 * np.pi * th)
    t = np.linspace(0.0, 1.0, m + 1)[:, None, None]
    beta = 0.125
    for _ in range(20):
        y = x + beta * np.sin(np.pi * t) * bump[None]
        y[0], y[-1] = x[0], x[-1]
        if _path_immersed(y, q):
            log.info("linear path not immersed; lifted with beta=%g", beta)
            return y
        beta *= 2
    raise ImmersionViolation("could not lift the linear path into the space of immersions")


class TimeSpacePreconditioner:
    """Inverse of the flat model Hessian ``(1/dt) sum_m lambda_m(n) |dc_hat|^2``.

    Fourier-diagonal in space with weights ``l + l^(1-2q) (2 pi |n|)^(2q)``
    taken from the segment lengths of a reference path, tridiagonal in time.
    """

    def __init__(self, x: np.ndarray, q: float):
        mid, _, dt = _slices(x)
        n = x.shape[1]
        ell = np.array([build_curve(c).length for c in mid])
        k = np.abs(frequencies(n))
        lam = np.repeat(ell[:, None], n, axis=1)
        if q > 0:
            lam = lam + ell[:, None] ** (1 - 2 * q) * (2 * np.pi * k[None, :]) ** (2 * q)
        self.lam = lam  # (M, N) per segment and mode
        self.scale = n * dt / 2
        self.m = x.shape[0] - 1

    def __call__(self, g: np.ndarray) -> np.ndarray:
        m = self.m
        if m < 2:
            return g
        G = np.fft.fft(g, axis=1)
        lam = self.lam
        diag = lam[:-1] + lam[1:]  # interior node i couples segments i-1 and i
        off = -lam[1:-1]
        # Thomas algorithm, vectorised over modes and components
        cp = np.zeros_like(off)
        dp = np.zeros_like(G)
        b = diag[0]
        dp[0] = G[0] / b[:, None]
        for i in range(1, m - 1):
            cp[i - 1] = off[i - 1] / b
            b = diag[i] - off[i - 1] * cp[i - 1]
            dp[i] = (G[i] - off[i - 1][:, None] * dp[i - 1]) / b[:, None]
        out = np.empty_like(G)
        out[-1] = dp[-1]
        for i in range(m - 3, -1, -1):
            out[i] = dp[i] - cp[i][:, None] * out[i + 1]
        return self.scale * np.fft.ifft(out, axis=1).real


def _report(x: np.ndarray, q: float, res, converged: bool, message: str) -> SolveReport:
    e = slice_energies(x, q)
    curves = [build_curve(c) for c in x]
    return SolveReport(
        distance_upper_bound=float(np.sum(np.sqrt(np.maximum(e, 0))) / (x.shape[0] - 1)),
        energy=float(np.sum(e) / (x.shape[0] - 1)),
        iterations=int(res.nit) if res is not None else 0,
        converged=bool(converged),
        min_speed_along_path=float(min(c.speed_fine.min() for c in curves)),
        min_length_along_path=float(min(c.length for c in curves)),
        message=message,
        energy_history=list(res.history) if res is not None else [],
    )


def solve_bvp(
    c0: DiscreteCurve,
    c1: DiscreteCurve,
    q: float,
    m: int = 16,
    max_iter: int = 500,
    tol: float = 1e-6,
    init: PathGrid | np.ndarray | None = None,
    precondition: bool = True,
) -> tuple[PathGrid, SolveReport]:
    """Minimise the discrete path energy with fixed endpoints.

    Starts from ``init`` or from :func:`initial_path`; stops when the gradient
    norm drops below ``tol * (1 + E)``.  ``SolveReport.distance_upper_bound``
    is the discrete length of the returned path.
    """
    if c0.x.shape != c1.x.shape:
        raise ConfigurationError("endpoint curves must share grid size and dimension")
    if q < 0:
        raise DomainError("q must be >= 0")
    if init is None:
        x = initial_path(c0, c1, m, q)
    else:
        x = _positions(init).copy()
        if x.shape[1:] != c0.x.shape:
            raise ConfigurationError("initial path does not match the endpoint grid")
        x[0], x[-1] = c0.x, c1.x
        m = x.shape[0] - 1
    if init is None and np.array_equal(c0.x, c1.x):
        x = np.repeat(c0.x[None], m + 1, axis=0)
        return PathGrid(x), _report(x, q, None, True, "identical endpoints")
    if m < 2:
        return PathGrid(x), _report(x, q, None, True, "no interior slices")

    ends = x[[0, -1]]

    def fun(interior):
        y = np.concatenate([ends[:1], interior, ends[1:]])
        f, g = _energy_and_gradient(y, q)
        return f, g[1:-1]

    pre = TimeSpacePreconditioner(x, q) if precondition else None
    res = lbfgs(fun, x[1:-1], gtol=lambda f: tol * (1 + f), max_iter=max_iter, precond=pre)
    x = np.concatenate([ends[:1], res.x, ends[1:]])
    return PathGrid(x), _report(x, q, res, res.converged, res.message)


def refine_path(p: PathGrid | np.ndarray, factor: int = 2) -> PathGrid:
    """Insert midpoints in time (``factor`` 2 or 4); spatial grid unchanged."""
    if factor not in (2, 4):
        raise DomainError("refinement factor must be 2 or 4")
    x = _positions(p)
    for _ in range(factor // 2):
        y = np.empty((2 * x.shape[0] - 1,) + x.shape[1:])
        y[0::2] = x
        y[1::2] = 0.5 * (x[1:] + x[:-1])
        x = y
    return PathGrid(x)


def _slice_grads(a: np.ndarray, b: np.ndarray, q: float, dt: float):
    """Partial derivatives of ``L_d(a, b) = dt * e((a+b)/2, (b-a)/dt)``."""
    e, dmid, dvel = slice_energy(0.5 * (a + b), (b - a) / dt, q, grad=True)
    d1 = dt * 0.5 * dmid - dvel
    d2 = dt * 0.5 * dmid + dvel
    return e, d1, d2


def _newton(residual, x0: np.ndarray, tol: float, max_iter: int = 30, fd_step: float = 1e-7) -> np.ndarray:
    """Newton iteration with a forward-difference Jacobian (batched evaluation)."""
    x = x0.copy()
    shape = x.shape
    size = x.size
    r = residual(x[None])[0]
    scale = max(1.0, float(np.abs(r).max()))
    for _ in range(max_iter):
        if np.abs(r).max() <= tol * scale:
            return x
        h = fd_step * max(1.0, float(np.abs(x).max()))
        pert = np.repeat(x[None], size, axis=0).reshape(size, size)
        pert[np.arange(size), np.arange(size)] += h
        J = ((residual(pert.reshape((size,) + shape)) - r[None]).reshape(size, size) / h).T
        dx = np.linalg.solve(J, -r.ravel()).reshape(shape)
        x = x + dx
        r = residual(x[None])[0]
        if np.abs(dx).max() <= 1e-15 * max(1.0, float(np.abs(x).max())):
            break
    if np.abs(r).max() <= tol * scale:
        return x
    raise InnerSolveFailure(f"implicit step residual {np.abs(r).max():.3e} above {tol * scale:.3e}")


def discrete_exp(
    c0: DiscreteCurve,
    h0: TangentField | np.ndarray,
    q: float,
    steps: int,
    tol: float = 1e-10,
) -> PathGrid:
    """Shoot a discrete geodesic on ``[0, 1]`` with ``steps`` segments.

    The first step matches the discrete momentum ``-D1 L_d(c0, c1)`` with the
    continuous momentum ``d/dv G^q_{c0}(v, v)`` at ``v = h0``; later steps solve
    the discrete Euler-Lagrange equation
    ``D2 L_d(c_{m-1}, c_m) + D1 L_d(c_m, c_{m+1}) = 0`` for ``c_{m+1}``.
    """
    if q < 1:
        raise DomainError("discrete_exp expects q >= 1")
    if steps < 2:
        raise DomainError("need at least two steps")
    h = h0.h if isinstance(h0, TangentField) else np.asarray(h0, dtype=float)
    if h.shape != c0.x.shape:
        raise ConfigurationError("initial velocity does not match the curve grid")
    dt = 1.0 / steps
    x = np.empty((steps + 1,) + c0.x.shape)
    x[0] = c0.x
    if not np.any(h):
        x[:] = c0.x
        return PathGrid(x)
    _, _, p0 = slice_energy(c0.x[None], h[None], q, grad=True)
    p0 = p0[0]

    def first(cand):
        a = np.broadcast_to(x[0], cand.shape)
        _, d1, _ = _slice_grads(a, cand, q, dt)
        return d1 + p0[None]

    x[1] = _newton(first, x[0] + dt * h, tol)
    for i in range(1, steps):
        _, _, d2 = _slice_grads(x[i - 1][None], x[i][None], q, dt)
        d2 = d2[0]

        def step(cand, a=x[i], d2=d2):
            aa = np.broadcast_to(a, cand.shape)
            _, d1, _ = _slice_grads(aa, cand, q, dt)
            return d1 + d2[None]

        x[i + 1] = _newton(step, 2 * x[i] - x[i - 1], tol)
    for xi in x:
        build_curve(xi, IMMERSION_EPS)
    return PathGrid(x)


def energy_drift(p: PathGrid | np.ndarray, q: float) -> float:
    """``max_m |e_m - e_0| / e_0`` for the segment metric values."""
    e = slice_energies(p, q)
    return float(np.max(np.abs(e - e[0])) / e[0]) if e[0] > 0 else float(np.max(np.abs(e)))
