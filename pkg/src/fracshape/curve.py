"""Discrete immersed closed curves and circle diffeomorphisms.

A curve is stored through its node values on the uniform grid; every derived
quantity (speed, length, the constant-speed reparametrization ``psi``) is
computed from the trigonometric interpolant on a grid ``OVERSAMPLE`` times
finer, which keeps aliasing from the non-polynomial speed ``|c_theta|`` well
below the tolerances used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import pdist

from .errors import ConfigurationError, DomainError, GenerationFailure, ImmersionViolation
from .spectral import SampledFunction, as_samples, frequencies, resample, spectral_derivative, trig_interpolate

__all__ = [
    "OVERSAMPLE",
    "IMMERSION_EPS",
    "DiscreteCurve",
    "TangentField",
    "DiffeoSample",
    "build_curve",
    "circle",
    "ds_derivative",
    "to_constant_speed",
    "diameter",
    "srv_transform",
    "compose",
    "random_curve",
    "random_diffeo",
    "invert_lift",
]

OVERSAMPLE = 4
IMMERSION_EPS = 1e-8
MAX_REJECTIONS = 100


def invert_lift(g: np.ndarray, u: ArrayLike, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve ``theta + g(theta) = u`` for a monotone circle lift.

    ``g`` holds uniform samples of the periodic part (band-limited).  A
    tabulated bracket from the samples is refined by safeguarded Newton
    steps, falling back to bisection whenever Newton leaves the bracket.
    """
    g = np.asarray(g, dtype=float).reshape(-1)
    m = g.size
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = u.ravel()
    gp = spectral_derivative(g)
    # table of the lift on [-1, 2) to bracket any u in [0, 1]
    nodes = np.arange(m) / m
    table_x = np.concatenate([nodes - 1, nodes, nodes + 1, [2.0]])
    table_y = np.concatenate([nodes - 1 + g, nodes + g, nodes + 1 + g, [2.0 + g[0]]])
    if np.any(np.diff(table_y) <= 0):
        raise DomainError("map is not monotone on the sampling grid")
    k = np.clip(np.searchsorted(table_y, u, side="right") - 1, 0, table_y.size - 2)
    lo, hi = table_x[k], table_x[k + 1]
    ylo, yhi = table_y[k], table_y[k + 1]
    theta = lo + (u - ylo) * (hi - lo) / (yhi - ylo)
    both = np.stack([g, gp], axis=1)
    active = np.arange(u.size)
    for _ in range(max_iter):
        t = theta[active]
        gv = trig_interpolate(both, t)
        vals = t + gv[:, 0] - u[active]
        slope = 1.0 + gv[:, 1]
        a, b = lo[active], hi[active]
        neg = vals < 0
        a = np.where(neg, np.maximum(a, t), a)
        b = np.where(neg, b, np.minimum(b, t))
        new = t - vals / slope
        bad = (new <= a) | (new >= b) | ~np.isfinite(new)
        new = np.where(bad, 0.5 * (a + b), new)
        done = np.abs(new - t) < tol
        theta[active], lo[active], hi[active] = new, a, b
        active = active[~done]
        if active.size == 0:
            break
    return theta.reshape(shape)


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Sampled immersed closed curve with cached arc-length data.

    Use :func:`build_curve` to construct; it validates the immersion
    condition.
    """

    position: SampledFunction
    speed_fine: np.ndarray = field(repr=False)
    length: float
    psi_periodic: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.position.n

    @property
    def d(self) -> int:
        return self.position.d

    @property
    def x(self) -> np.ndarray:
        return self.position.samples

    @property
    def speed(self) -> np.ndarray:
        """Speed ``|c_theta|`` at the nodes."""
        return self.speed_fine[:: OVERSAMPLE]

    @cached_property
    def tangent(self) -> np.ndarray:
        return spectral_derivative(self.x)

    def psi(self, theta: ArrayLike) -> np.ndarray:
        """Normalised arc length ``psi_c(theta)`` (lifted, so psi(1) = 1)."""
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        return (flat + trig_interpolate(self.psi_periodic, flat)[:, 0]).reshape(theta.shape)

    def psi_inverse(self, u: ArrayLike) -> np.ndarray:
        return invert_lift(self.psi_periodic, u)

    @cached_property
    def psi_nodes(self) -> np.ndarray:
        return self.position.nodes + self.psi_periodic[:: OVERSAMPLE]

    @cached_property
    def psi_inverse_nodes(self) -> np.ndarray:
        return self.psi_inverse(self.position.nodes)

    @property
    def is_constant_speed(self) -> bool:
        return bool(np.ptp(self.speed_fine) <= 1e-13 * self.length)


@dataclass(frozen=True, eq=False)
class TangentField:
    """A vector field ``h`` along a curve, on the same grid."""

    field: SampledFunction
    curve: DiscreteCurve

    def __post_init__(self) -> None:
        if self.field.samples.shape != self.curve.x.shape:
            raise ConfigurationError(
                f"field shape {self.field.samples.shape} does not match curve {self.curve.x.shape}"
            )

    @property
    def h(self) -> np.ndarray:
        return self.field.samples


def _fine_speed(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    dx = resample(spectral_derivative(x), OVERSAMPLE * n)
    return np.linalg.norm(dx, axis=1)


def _psi_periodic(speed_fine: np.ndarray, length: float) -> np.ndarray:
    # antiderivative of (speed - length)/length, pinned to zero at theta = 0
    p = speed_fine.size
    k = frequencies(p)
    S = np.fft.fft(speed_fine) / p
    A = np.zeros(p, dtype=complex)
    nz = k != 0
    A[nz] = S[nz] / (2j * np.pi * k[nz])
    A[p // 2] = 0.0
    g = (np.fft.ifft(A) * p).real
    return (g - g[0]) / length


def build_curve(position: SampledFunction | ArrayLike, eps: float = IMMERSION_EPS) -> DiscreteCurve:
    """Validate the immersion condition and cache speed, length and psi.

    Raises
    ------
    ImmersionViolation
        if the minimal speed on the fine grid is below ``eps * max speed``.
    """
    if not isinstance(position, SampledFunction):
        position = SampledFunction(position)
    if position.d < 2:
        raise ConfigurationError("curves need d >= 2")
    speed = _fine_speed(position.samples)
    smax = float(speed.max())
    smin = float(speed.min())
    if not smax > 0 or smin < eps * smax:
        raise ImmersionViolation(
            f"ImmersionViolation: min speed {smin:.3e} below {eps:.1e} x max speed {smax:.3e}"
        )
    length = float(speed.mean())
    speed.setflags(write=False)
    g = _psi_periodic(speed, length)
    g.setflags(write=False)
    return DiscreteCurve(position=position, speed_fine=speed, length=length, psi_periodic=g)


def circle(n: int, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0), d: int = 2) -> DiscreteCurve:
    """Circle ``center + radius (cos 2 pi theta, sin 2 pi theta)`` in R^d."""
    t = np.arange(n) / n
    x = np.zeros((n, d))
    x[:, 0] = radius * np.cos(2 * np.pi * t)
    x[:, 1] = radius * np.sin(2 * np.pi * t)
    x[:, : len(center)] += np.asarray(center, dtype=float)
    return build_curve(x)


def ds_derivative(c: DiscreteCurve, h: TangentField | ArrayLike) -> TangentField:
    """Arc-length derivative ``(1/|c_theta|) d/dtheta h``."""
    hs = h.h if isinstance(h, TangentField) else as_samples(h)
    if hs.shape != c.x.shape:
        raise ConfigurationError("field and curve grids differ")
    out = spectral_derivative(hs) / c.speed[:, None]
    return TangentField(SampledFunction(out), c)


def to_constant_speed(c: DiscreteCurve) -> DiscreteCurve:
    """Resample ``c o psi_c^{-1}`` on the nodes; its speed is the length."""
    if c.is_constant_speed:
        return c
    pts = c.psi_inverse_nodes
    return build_curve(trig_interpolate(c.x, pts))


def diameter(c: DiscreteCurve | ArrayLike) -> float:
    """Largest distance between two nodes (node-level diameter)."""
    x = c.x if isinstance(c, DiscreteCurve) else np.asarray(c, dtype=float)
    return float(pdist(x).max())


def srv_transform(c: DiscreteCurve) -> SampledFunction:
    """Square-root velocity ``c_theta / |c_theta|^(1/2)`` at the nodes."""
    dx = c.tangent
    return SampledFunction(dx / np.sqrt(c.speed)[:, None])


@dataclass(frozen=True, eq=False)
class DiffeoSample:
    """Orientation preserving circle diffeomorphism ``theta + g(theta)``.

    ``periodic`` samples the periodic part ``g`` on a uniform grid; the map is
    evaluated anywhere through its trigonometric interpolant.
    """

    periodic: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        g = np.array(self.periodic, dtype=float).reshape(-1)
        g.setflags(write=False)
        object.__setattr__(self, "periodic", g)
        if self.derivative_values.min() <= 0:
            raise DomainError("diffeomorphism must have positive derivative")

    @property
    def n(self) -> int:
        return self.periodic.size

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.n) / self.n + self.periodic

    @cached_property
    def derivative_values(self) -> np.ndarray:
        return 1.0 + spectral_derivative(self.periodic)

    def __call__(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        return (flat + trig_interpolate(self.periodic, flat)[:, 0]).reshape(theta.shape)

    def derivative(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        gp = spectral_derivative(self.periodic)
        return (1.0 + trig_interpolate(gp, theta.ravel())[:, 0]).reshape(theta.shape)

    def inverse(self, u: ArrayLike) -> np.ndarray:
        return invert_lift(self.periodic, u)

    def max_derivative(self, factor: int = 8) -> float:
        """``max phi_theta`` over a grid ``factor`` times finer."""
        return float(1.0 + spectral_derivative(resample(self.periodic, factor * self.n)).max())

    def min_derivative(self, factor: int = 8) -> float:
        return float(1.0 + spectral_derivative(resample(self.periodic, factor * self.n)).min())


def compose(f: DiscreteCurve | SampledFunction | ArrayLike, phi: DiffeoSample, n: int | None = None) -> np.ndarray:
    """Samples of ``f o phi`` on ``n`` uniform nodes (default: grid of f)."""
    x = f.x if isinstance(f, DiscreteCurve) else as_samples(f)
    n = x.shape[0] if n is None else n
    return trig_interpolate(x, phi(np.arange(n) / n))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_trig_poly(rng: np.random.Generator, n: int, d: int, max_mode: int, decay: float, amplitude: float) -> np.ndarray:
    """Real trig polynomial with coefficient scale ``amplitude * |k|^-decay``."""
    F = np.zeros((n, d), dtype=complex)
    k = np.arange(1, max_mode + 1)
    scale = amplitude * k ** (-float(decay))
    coef = (rng.standard_normal((max_mode, d)) + 1j * rng.standard_normal((max_mode, d))) * scale[:, None] / np.sqrt(2)
    F[1 : max_mode + 1] = coef
    F[n - max_mode :] = np.conj(coef[::-1])
    return (np.fft.ifft(F, axis=0) * n).real


def random_curve(
    seed,
    n: int = 256,
    d: int = 2,
    decay: float = 3.0,
    min_speed: float | None = None,
    amplitude: float = 0.25,
    max_mode: int | None = None,
    radius: float = 1.0,
) -> DiscreteCurve:
    """Circle of given radius plus random modes ``|k| <= max_mode``.

    Draws are rejected until the minimal speed (fine grid) reaches
    ``min_speed`` (default: a quarter of the base circle speed
    ``2 pi radius``); deterministic in ``seed``.
    """
    if decay <= 1:
        raise DomainError("decay must exceed 1")
    rng = _rng(seed)
    if min_speed is None:
        min_speed = 0.5 * np.pi * radius
    max_mode = max(1, n // 8) if max_mode is None else max_mode
    if not 1 <= max_mode < n // 2:
        raise ConfigurationError("max_mode must lie in [1, n/2)")
    t = np.arange(n) / n
    base = np.zeros((n, d))
    base[:, 0] = radius * np.cos(2 * np.pi * t)
    base[:, 1] = radius * np.sin(2 * np.pi * t)
    for _ in range(MAX_REJECTIONS):
        x = base + radius * random_trig_poly(rng, n, d, max_mode, decay, amplitude)
        if _fine_speed(x).min() >= min_speed:
            return build_curve(x)
    raise GenerationFailure(f"no curve with min speed {min_speed} after {MAX_REJECTIONS} draws")


def random_diffeo(
    seed,
    n: int = 256,
    amplitude: float = 0.5,
    modes: int = 3,
    min_derivative: float = 0.05,
) -> DiffeoSample:
    """``theta + amplitude * sum_k (a_k sin + b_k (cos - 1))(2 pi k theta) / (2 pi k)``.

    Fixes 0; rejection enforces ``phi_theta >= min_derivative``.
    """
    rng = _rng(seed)
    t = np.arange(n) / n
    if amplitude == 0:
        return DiffeoSample(np.zeros(n))
    for _ in range(MAX_REJECTIONS):
        a = rng.standard_normal(modes)
        b = rng.standard_normal(modes)
        g = np.zeros(n)
        for k in range(1, modes + 1):
            w = 2 * np.pi * k
            g += (a[k - 1] * np.sin(w * t) + b[k - 1] * (np.cos(w * t) - 1)) / (w * k)
        g *= amplitude
        if 1.0 + spectral_derivative(resample(g, 8 * n)).min() >= min_derivative:
            return DiffeoSample(g)
    raise GenerationFailure(f"no diffeomorphism with derivative >= {min_derivative} after {MAX_REJECTIONS} draws")
