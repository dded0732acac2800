"""Reparametrization-invariant metrics ``G^q_c`` and ``Gdot^q_c``.

Two independent evaluations of the homogeneous part are provided:

``pullback``
    resample ``h o psi_c^{-1}`` on the fine grid by trigonometric
    interpolation and apply the Fourier multiplier there, weighted by
    ``l_c^(1-2q)``.
``arclength``
    integrate against arc length directly: the Fourier coefficients of
    ``h o psi_c^{-1}`` are ``(1/l_c) int h(theta) exp(-2 pi i n psi_c(theta))
    |c_theta| dtheta``, evaluated by quadrature on the fine grid.  Nothing is
    inverted, so the expression is smooth in the curve; the geodesic solver
    differentiates it (see :func:`slice_energy`).

For ``q = 0`` the metric is the plain L2 arc-length metric ``g0``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike

from .curve import IMMERSION_EPS, OVERSAMPLE, DiscreteCurve, TangentField, diameter
from .errors import ConfigurationError, DomainError, ImmersionViolation
from .spectral import as_samples, frequencies, resample, spectral_derivative, trig_interpolate

__all__ = [
    "METHODS",
    "g0",
    "gq_dot",
    "gq",
    "gq_norm",
    "gq_dot_norm",
    "embedding_bound",
    "srv_lower_bound",
    "distance_lower_bound",
    "sup_distance",
    "slice_energy",
]

METHODS = ("pullback", "arclength")


def _field(c: DiscreteCurve, h) -> np.ndarray:
    if isinstance(h, TangentField):
        if h.curve is not c and h.h.shape != c.x.shape:
            raise ConfigurationError("tangent field lives on another grid")
        return h.h
    x = as_samples(h)
    if x.shape != c.x.shape:
        raise ConfigurationError(f"field shape {x.shape} does not match curve {c.x.shape}")
    return x


def _check_q(q: float) -> float:
    q = float(q)
    if not np.isfinite(q) or q < 0:
        raise DomainError(f"Sobolev order must be finite and >= 0, got {q}")
    return q


def g0(c: DiscreteCurve, h, k) -> float:
    """L2 metric with respect to arc length, ``int <h, k> |c_theta| dtheta``."""
    p = OVERSAMPLE * c.n
    hf = resample(_field(c, h), p)
    kf = resample(_field(c, k), p)
    return float(np.mean(np.sum(hf * kf, axis=1) * c.speed_fine))


def _pullback_coeffs(c: DiscreteCurve, x: np.ndarray) -> np.ndarray:
    p = OVERSAMPLE * c.n
    pts = _psi_inverse_fine(c)
    vals = trig_interpolate(x, pts)
    return np.fft.fft(vals, axis=0) / p


def _psi_inverse_fine(c: DiscreteCurve) -> np.ndarray:
    # cached on the instance; DiscreteCurve is frozen so go through __dict__
    cache = c.__dict__.get("_psi_inv_fine")
    if cache is None:
        p = OVERSAMPLE * c.n
        cache = c.psi_inverse(np.arange(p) / p)
        c.__dict__["_psi_inv_fine"] = cache
    return cache


def _arclength_coeffs(c: DiscreteCurve, x: np.ndarray) -> np.ndarray:
    """Coefficients ``n = 1..N`` of ``x o psi^{-1}`` by arc-length quadrature."""
    p = OVERSAMPLE * c.n
    theta = np.arange(p) / p
    psi = theta + c.psi_periodic
    xf = resample(x, p)
    w = xf * (c.speed_fine / (c.length * p))[:, None]
    small, big = _power_blocks(np.exp(-2j * np.pi * psi)[None, :], c.n)
    return _nudft(small, big, w[None])[0]


def _power_blocks(z: np.ndarray, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``z**k``, ``k = 1..kmax``, as ``big[j] * small[i]`` with ``k = j*blk + i + 1``.

    ``small`` has shape (B, blk, P) and holds ``z**1..z**blk``; ``big`` has
    shape (B, kmax/blk, P) and holds ``z**(j*blk)``.  The full power table
    is never formed, which saves most of the memory traffic.
    """
    blk = 1 << (max(kmax - 1, 1).bit_length() + 1) // 2
    while kmax % blk:
        blk //= 2
    b, p = z.shape
    small = np.empty((b, blk, p), dtype=complex)
    small[:, 0] = z
    for i in range(1, blk):
        small[:, i] = small[:, i - 1] * z
    nb = kmax // blk
    big = np.empty((b, nb, p), dtype=complex)
    big[:, 0] = 1.0
    for j in range(1, nb):
        big[:, j] = big[:, j - 1] * small[:, -1]
    return small, big


def _nudft(small: np.ndarray, big: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``a[b, k-1, :] = sum_p z[b, p]**k w[b, p, :]`` from the blocks of :func:`_power_blocks`."""
    b, blk, p = small.shape
    d = w.shape[2]
    y = (small.transpose(0, 2, 1)[:, :, :, None] * w[:, :, None, :]).reshape(b, p, blk * d)
    return np.matmul(big, y).reshape(b, -1, d)


def _nudft_adjoint(small: np.ndarray, big: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``r[b, p, :] = sum_k z[b, p]**k c[b, k-1, :]`` (no conjugation)."""
    b, blk, p = small.shape
    d = c.shape[2]
    y = np.matmul(big.transpose(0, 2, 1), c.reshape(b, -1, blk * d)).reshape(b, p, blk, d)
    return np.einsum("bpid,bip->bpd", y, small)


def gq_dot(c: DiscreteCurve, h, k, q: float, method: str = "pullback") -> float:
    """Homogeneous invariant form ``Gdot^q_c(h, k) = l^(1-2q) <h o psi^-1, k o psi^-1>_{Hdot^q}``."""
    q = _check_q(q)
    hx, kx = _field(c, h), _field(c, k)
    scale = c.length ** (1 - 2 * q)
    if method == "pullback":
        H = _pullback_coeffs(c, hx)
        K = H if kx is hx else _pullback_coeffs(c, kx)
        kk = np.abs(frequencies(H.shape[0]))
        w = (2 * np.pi * kk) ** (2 * q)
        w[0] = 0.0
        return float(scale * np.sum(w[:, None] * (H * np.conj(K)).real))
    if method == "arclength":
        H = _arclength_coeffs(c, hx)
        K = H if kx is hx else _arclength_coeffs(c, kx)
        kk = np.arange(1, H.shape[0] + 1)
        w = (2 * np.pi * kk) ** (2 * q)
        # negative frequencies are the conjugates for real fields
        return float(2 * scale * np.sum(w[:, None] * (H * np.conj(K)).real))
    raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")


def gq(c: DiscreteCurve, h, k, q: float, method: str = "pullback") -> float:
    """Full invariant metric ``G^q_c(h, k) = g0 + Gdot^q`` (``g0`` alone at q = 0)."""
    q = _check_q(q)
    base = g0(c, h, k)
    if q == 0:
        return base
    return base + gq_dot(c, h, k, q, method)


def gq_norm(c: DiscreteCurve, h, q: float, method: str = "pullback") -> float:
    return float(np.sqrt(max(gq(c, h, h, q, method), 0.0)))


def gq_dot_norm(c: DiscreteCurve, h, q: float, method: str = "pullback") -> float:
    return float(np.sqrt(max(gq_dot(c, h, h, q, method), 0.0)))


def embedding_bound(c: DiscreteCurve, h, q: float, ell: float) -> float:
    """Right-hand side ``sqrt((|h|^2_{G^0} + ell^(2q) |h|^2_{Gdot^q}) / ell)``.

    ``sup |h|`` is bounded by a constant multiple of this for every
    ``ell`` in ``(0, l_c]`` when ``q > 1/2``.
    """
    q = _check_q(q)
    if q <= 0.5:
        raise DomainError("embedding bound needs q > 1/2")
    if not 0 < ell <= c.length * (1 + 1e-12):
        raise DomainError(f"ell must lie in (0, l_c] = (0, {c.length}], got {ell}")
    a = g0(c, h, h)
    b = gq_dot(c, h, h, q)
    return float(np.sqrt((a + ell ** (2 * q) * b) / ell))


def _srv_fine(c: DiscreteCurve) -> np.ndarray:
    dx = resample(c.tangent, OVERSAMPLE * c.n)
    return dx / np.sqrt(c.speed_fine)[:, None]


def srv_lower_bound(c0: DiscreteCurve, c1: DiscreteCurve) -> float:
    """L2 distance between square-root velocity transforms (fine-grid quadrature)."""
    if c0.x.shape != c1.x.shape:
        raise ConfigurationError("curves must share grid size and dimension")
    diff = _srv_fine(c0) - _srv_fine(c1)
    return float(np.sqrt(np.mean(np.sum(diff**2, axis=1))))


def sup_distance(c0: DiscreteCurve | ArrayLike, c1: DiscreteCurve | ArrayLike) -> float:
    """``max_j |c0(theta_j) - c1(theta_j)|``."""
    x0 = c0.x if isinstance(c0, DiscreteCurve) else np.asarray(c0)
    x1 = c1.x if isinstance(c1, DiscreteCurve) else np.asarray(c1)
    if x0.shape != x1.shape:
        raise ConfigurationError("curves must share grid size and dimension")
    return float(np.linalg.norm(x0 - x1, axis=1).max())


def distance_lower_bound(c0: DiscreteCurve, c1: DiscreteCurve) -> float:
    """``min{|c0-c1|_inf, diam_max} * min{diam_max^(1/2), 1}``.

    This is the distance lower bound up to an unknown universal constant,
    which is not estimated.
    """
    dmax = max(diameter(c0), diameter(c1))
    return float(min(sup_distance(c0, c1), dmax) * min(np.sqrt(dmax), 1.0))


# ---------------------------------------------------------------------------
# batched kernel for path energies


@lru_cache(maxsize=16)
def _operators(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense real operators: upsample (P x N), derivative+upsample (P x N),
    antiderivative on the fine grid (P x P)."""
    p = OVERSAMPLE * n
    eye = np.eye(n)
    up = resample(eye, p)
    dup = resample(spectral_derivative(eye), p)
    k = frequencies(p)
    mult = np.zeros(p, dtype=complex)
    nz = k != 0
    mult[nz] = 1.0 / (2j * np.pi * k[nz])
    mult[p // 2] = 0.0
    anti = np.fft.ifft(np.fft.fft(np.eye(p), axis=0) * mult[:, None], axis=0).real
    # contiguous copies: strided operands fall off the fast BLAS path
    ops = tuple(np.ascontiguousarray(a) for a in (up, dup, anti))
    for a in ops:
        a.setflags(write=False)
    return ops


def _apply(op: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``op @ x[b]`` for every batch entry, as one matrix product."""
    b, n, d = x.shape
    y = op @ x.transpose(1, 0, 2).reshape(n, b * d)
    return y.reshape(op.shape[0], b, d).transpose(1, 0, 2)


def slice_energy(
    cm: np.ndarray,
    v: np.ndarray,
    q: float,
    grad: bool = False,
    eps: float = IMMERSION_EPS,
    chunk: int = 1 << 21,
):
    """``G^q_{cm}(v, v)`` for a batch of (curve, field) pairs, optionally with gradients.

    Parameters
    ----------
    cm, v : arrays of shape (B, N, d); node values of curves and fields.
    q : Sobolev order.
    grad : also return the gradients with respect to ``cm`` and ``v``.

    Returns
    -------
    e : (B,) metric values (arc-length route), and if ``grad`` the arrays
    ``de/dcm`` and ``de/dv`` of shape (B, N, d).

    Raises
    ------
    ImmersionViolation if any curve of the batch is not immersed.
    """
    q = _check_q(q)
    cm = np.asarray(cm, dtype=float)
    v = np.asarray(v, dtype=float)
    b, n, d = cm.shape
    p = OVERSAMPLE * n
    per = max(1, chunk // (n * p))
    if b > per:
        parts = [slice_energy(cm[i : i + per], v[i : i + per], q, grad, eps, chunk) for i in range(0, b, per)]
        if not grad:
            return np.concatenate(parts)
        return tuple(np.concatenate([pt[j] for pt in parts]) for j in range(3))

    up, dup, anti = _operators(n)
    ct = _apply(dup, cm)
    vf = _apply(up, v)
    s = np.sqrt(np.sum(ct**2, axis=2))
    smax = s.max(axis=1)
    smin = s.min(axis=1)
    if np.any(~(smin >= eps * smax)) or np.any(~(smax > 0)):
        i = int(np.argmin(smin / np.maximum(smax, 1e-300)))
        raise ImmersionViolation(f"ImmersionViolation: slice {i} has min speed {smin[i]:.3e} (max {smax[i]:.3e})")
    ell = s.mean(axis=1)
    v2 = np.sum(vf**2, axis=2)
    e0 = np.mean(v2 * s, axis=1)
    if q == 0:
        if not grad:
            return e0
        dvf = 2 * vf * (s / p)[:, :, None]
        ds = v2 / p
        dct = ds[:, :, None] * ct / s[:, :, None]
        return e0, _apply(dup.T, dct), _apply(up.T, dvf)

    theta = np.arange(p) / p
    gs = s @ anti.T
    gpsi = (gs - gs[:, :1]) / ell[:, None]
    z = np.exp(-2j * np.pi * (theta[None, :] + gpsi))
    small, big = _power_blocks(z, n)
    wq = (s / (ell[:, None] * p))[:, :, None] * vf
    a = _nudft(small, big, wq)
    kk = np.arange(1, n + 1)
    W = (2 * np.pi * kk) ** (2 * q)
    scale = ell ** (1 - 2 * q)
    edot = 2 * scale * np.einsum("k,bkd->b", W, np.abs(a) ** 2)
    e = e0 + edot
    if not grad:
        return e

    Wa = W[None, :, None] * np.conj(a)
    both = _nudft_adjoint(small, big, np.concatenate([Wa, (-2j * np.pi * kk)[None, :, None] * Wa], axis=2))
    R, Rp = both[:, :, :d], both[:, :, d:]
    pref = 4 * scale / (ell * p)
    dvf = 2 * vf * (s / p)[:, :, None] + (pref[:, None] * s)[:, :, None] * R.real
    ds = v2 / p + pref[:, None] * np.sum(R.real * vf, axis=2)
    dpsi = pref[:, None] * s * np.sum((Rp * vf).real, axis=2)
    dl = (-1 - 2 * q) * edot / ell
    # psi = theta + (A s - (A s)_0) / l
    ds += (dpsi @ anti - np.sum(dpsi, axis=1, keepdims=True) * anti[0][None, :]) / ell[:, None]
    dl -= np.sum(dpsi * gpsi, axis=1) / ell
    ds += dl[:, None] / p
    dct = ds[:, :, None] * ct / s[:, :, None]
    dcm = _apply(dup.T, dct)
    dv = _apply(up.T, dvf)
    return e, dcm, dv
