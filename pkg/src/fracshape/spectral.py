"""Periodic spectral calculus on the unit circle R/Z.

Functions are sampled at the nodes ``theta_j = j/N`` and identified with their
band-limited trigonometric interpolant.  The forward transform carries the
``1/N`` normalisation so that the zeroth coefficient is the mean, and the
fractional operator ``Lambda = H d/dtheta`` has symbol ``2*pi*|n|``.

The Nyquist mode ``n = -N/2`` is treated as the real cosine
``cos(pi*N*theta)``: it is split evenly between ``+N/2`` and ``-N/2`` when a
function is resampled, and it is dropped by odd operators (derivatives).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigurationError, DomainError

__all__ = [
    "SampledFunction",
    "SpectralCoeffs",
    "as_samples",
    "fourier_forward",
    "fourier_inverse",
    "fractional_multiplier",
    "hq_dot_seminorm",
    "hq_norm",
    "trig_interpolate",
    "spectral_derivative",
    "resample",
    "frequencies",
    "symbol",
]

MIN_GRID = 8


def _check_grid(n: int) -> None:
    if n < MIN_GRID or n & (n - 1):
        raise ConfigurationError(f"grid size must be a power of two >= {MIN_GRID}, got {n}")


@dataclass(frozen=True)
class SampledFunction:
    """Uniform samples of an R^d valued periodic function.

    ``samples`` has shape ``(N, d)``; a 1-D input is read as ``d = 1``.
    """

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ConfigurationError(f"samples must have shape (N, d), got {arr.shape}")
        _check_grid(arr.shape[0])
        if not np.all(np.isfinite(arr)):
            raise DomainError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @classmethod
    def from_callable(cls, func, n: int) -> "SampledFunction":
        """Sample ``func(theta)`` on the ``n`` uniform nodes."""
        return cls(np.asarray(func(np.arange(n) / n), dtype=float))


@dataclass(frozen=True)
class SpectralCoeffs:
    """Fourier coefficients in numpy FFT order (``n = 0, 1, ..., -1``)."""

    coeffs: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        return frequencies(self.n)

    def coefficient(self, k: int) -> np.ndarray:
        """Coefficient vector for integer frequency ``k`` in ``[-N/2, N/2)``."""
        if not -self.n // 2 <= k < self.n // 2:
            raise DomainError(f"frequency {k} outside [-{self.n // 2}, {self.n // 2})")
        return self.coeffs[k % self.n]

    def centered(self) -> np.ndarray:
        """Coefficients reordered to run from ``-N/2`` to ``N/2 - 1``."""
        return np.fft.fftshift(self.coeffs, axes=0)


def as_samples(f: SampledFunction | ArrayLike) -> np.ndarray:
    """Return an ``(N, d)`` float array from a SampledFunction or array."""
    if isinstance(f, SampledFunction):
        return f.samples
    return SampledFunction(f).samples


@lru_cache(maxsize=64)
def frequencies(n: int) -> np.ndarray:
    """Integer frequencies in FFT order."""
    out = np.fft.fftfreq(n, 1.0 / n)
    out.setflags(write=False)
    return out


def symbol(n: int, p: float) -> np.ndarray:
    """Multiplier ``(2 pi |k|)^p`` on the FFT frequencies, with ``0^0 = 1``."""
    if p < 0:
        raise DomainError(f"order must be nonnegative, got {p}")
    k = np.abs(frequencies(n))
    if p == 0:
        return np.ones(n)
    return (2 * np.pi * k) ** p


def _seminorm_weights(n: int, q: float) -> np.ndarray:
    # the seminorm never sees the mean, whatever q is
    w = symbol(n, q).copy()
    w[0] = 0.0
    return w


def fourier_forward(f: SampledFunction | ArrayLike) -> SpectralCoeffs:
    """Coefficients ``(1/N) sum_j f(theta_j) exp(-2 pi i n theta_j)``."""
    x = as_samples(f)
    return SpectralCoeffs(np.fft.fft(x, axis=0) / x.shape[0])


def fourier_inverse(F: SpectralCoeffs, real: bool = True) -> SampledFunction:
    """Inverse of :func:`fourier_forward`."""
    x = np.fft.ifft(F.coeffs, axis=0) * F.n
    if real:
        return SampledFunction(x.real)
    return x


def fractional_multiplier(F: SpectralCoeffs, p: float) -> SpectralCoeffs:
    """Apply ``Lambda^p``, i.e. multiply coefficient ``n`` by ``(2 pi |n|)^p``."""
    w = symbol(F.n, p)
    return SpectralCoeffs(F.coeffs * w[:, None])


def hq_dot_seminorm(f: SampledFunction | ArrayLike, q: float) -> float:
    """Homogeneous seminorm ``sqrt(sum_n (2 pi |n|)^(2q) |f_n|^2)``.

    The mean is excluded for every ``q``, so ``q = 0`` gives the L2 norm of
    ``f - mean(f)``.
    """
    F = fourier_forward(f).coeffs
    w = _seminorm_weights(F.shape[0], 2 * q)
    return float(np.sqrt(np.sum(w[:, None] * np.abs(F) ** 2)))


def hq_norm(f: SampledFunction | ArrayLike, q: float) -> float:
    """Inhomogeneous norm ``sqrt(sum_n (1 + (2 pi n)^2)^q |f_n|^2)``."""
    if q < 0:
        raise DomainError(f"order must be nonnegative, got {q}")
    F = fourier_forward(f).coeffs
    k = frequencies(F.shape[0])
    w = (1.0 + (2 * np.pi * k) ** 2) ** q
    return float(np.sqrt(np.sum(w[:, None] * np.abs(F) ** 2)))


def spectral_derivative(x: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral ``d^order/dtheta^order`` of real samples along axis 0.

    The Nyquist coefficient is zeroed for odd orders.
    """
    n = x.shape[0]
    k = frequencies(n)
    mult = (2j * np.pi * k) ** order
    if order % 2:
        mult[n // 2] = 0.0
    shape = (n,) + (1,) * (x.ndim - 1)
    return np.fft.ifft(np.fft.fft(x, axis=0) * mult.reshape(shape), axis=0).real


def _pad_coeffs(F: np.ndarray, m: int) -> np.ndarray:
    """Embed length-n FFT-ordered coefficients in a length-m array (m >= n)."""
    n = F.shape[0]
    out = np.zeros((m,) + F.shape[1:], dtype=complex)
    h = n // 2
    out[:h] = F[:h]
    out[m - h + 1 :] = F[h + 1 :]
    # split the Nyquist cosine between +n/2 and -n/2
    out[h] = 0.5 * F[h]
    out[m - h] = 0.5 * F[h]
    return out


def _truncate_coeffs(F: np.ndarray, n: int) -> np.ndarray:
    m = F.shape[0]
    h = n // 2
    out = np.zeros((n,) + F.shape[1:], dtype=complex)
    out[:h] = F[:h]
    out[h + 1 :] = F[m - h + 1 :]
    out[h] = F[h] + F[m - h]
    return out


def resample(x: np.ndarray, m: int) -> np.ndarray:
    """Resample real periodic samples (axis 0) onto ``m`` uniform nodes.

    Upsampling evaluates the trigonometric interpolant exactly; downsampling
    keeps the lowest ``m`` frequencies.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if m == n:
        return x.copy()
    F = np.fft.fft(x, axis=0) / n
    G = _pad_coeffs(F, m) if m > n else _truncate_coeffs(F, m)
    return (np.fft.ifft(G, axis=0) * m).real


def _interp_rows(F: np.ndarray, pts: np.ndarray, kmax: int) -> np.ndarray:
    """Evaluate the real interpolant with coefficients F at pts via power sums.

    ``z**k`` for ``k = 1..K`` is factored as ``z**(j*blk) * z**i`` so the sum
    becomes two small matrix products instead of a full power table.
    """
    n = F.shape[0]
    d = F.shape[1]
    h = n // 2
    z = np.exp(2j * np.pi * pts)
    pos = F[1 : kmax + 1].copy()
    nyq = kmax >= h
    if nyq:
        # the Nyquist mode is a pure cosine, added separately below
        pos[h - 1] = 0.0
    blk = max(1, int(np.sqrt(kmax)))
    nb = -(-kmax // blk)
    coef = np.zeros((nb * blk, d), dtype=complex)
    coef[:kmax] = pos
    small = np.empty((pts.size, blk), dtype=complex)
    small[:, 0] = z
    for i in range(1, blk):
        small[:, i] = small[:, i - 1] * z
    big = np.empty((pts.size, nb), dtype=complex)
    big[:, 0] = 1.0
    for j in range(1, nb):
        big[:, j] = big[:, j - 1] * small[:, -1]
    # inner[p, j, :] = sum_i z^(i+1) coef[j*blk + i]
    inner = (small @ coef.reshape(nb, blk, d).transpose(1, 0, 2).reshape(blk, nb * d)).reshape(pts.size, nb, d)
    vals = F[0].real[None, :] + 2 * np.einsum("pj,pjd->pd", big, inner).real
    if nyq:
        vals += (F[h][None, :] * np.cos(np.pi * n * pts)[:, None]).real
    return vals


def trig_interpolate(
    f: SampledFunction | ArrayLike,
    points: ArrayLike,
    max_frequency: int | None = None,
    chunk: int = 1 << 20,
) -> np.ndarray:
    """Evaluate the band-limited interpolant of ``f`` at arbitrary points.

    Parameters
    ----------
    f : samples on the uniform grid.
    points : positions in R (taken modulo 1).
    max_frequency : ignore frequencies above this (useful when ``f`` is
        known to be band-limited, it only saves work).

    Returns
    -------
    Array of shape ``(len(points), d)``.
    """
    x = as_samples(f)
    pts = np.asarray(points, dtype=float).ravel()
    if not np.all(np.isfinite(pts)):
        raise DomainError("interpolation points must be finite")
    n = x.shape[0]
    kmax = n // 2 if max_frequency is None else min(int(max_frequency), n // 2)
    F = np.fft.fft(x, axis=0) / n
    pts = np.mod(pts, 1.0)
    step = max(1, chunk // max(kmax, 1))
    out = np.empty((pts.size, x.shape[1]))
    for start in range(0, pts.size, step):
        sl = slice(start, start + step)
        out[sl] = _interp_rows(F, pts[sl], max(kmax, 1))
    return out
