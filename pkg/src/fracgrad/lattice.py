"""Ewald-split lattice sums for power-law kernels.

Periodising a kernel ``|z|^(-2 sigma)`` over the period lattice ``L Z^d``
needs the shifted Epstein zeta function

    Z(a; sigma) = sum_{m in Z^d} |m + a|^(-2 sigma),

and the odd gradient kernels need ``sum_m (m + a) |m + a|^(-2 tau - 2)``,
which is ``-dZ/da / (2 tau)``.  Both are evaluated with the classical theta
function split at ``t = 1``: a rapidly convergent real-space sum of upper
incomplete gamma functions plus its Poisson dual.  The unshifted
``E_d(sigma) = sum_{m != 0} |m|^(-2 sigma)`` (analytically continued) gives
the constants of the lattice-sum singular corrections in :mod:`singular`.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = ["upper_gamma", "epstein_zeta", "shifted_power_sum", "shifted_odd_sum"]

_REAL_IMAGES = 4
_DUAL_IMAGES = 4


def upper_gamma(a: float, x):
    """Upper incomplete gamma ``Gamma(a, x)`` for real ``a`` (any sign) and ``x > 0``."""
    x = np.asarray(x, dtype=np.float64)
    if a > 0:
        return special.gammaincc(a, x) * special.gamma(a)
    if a == 0:
        return special.exp1(x)
    # Gamma(a, x) = (Gamma(a + 1, x) - x^a e^-x) / a
    return (upper_gamma(a + 1.0, x) - x**a * np.exp(-x)) / a


@lru_cache(maxsize=None)
def _images(d: int, m: int, skip_origin: bool) -> np.ndarray:
    pts = np.array(list(itertools.product(range(-m, m + 1), repeat=d)), dtype=np.float64)
    if skip_origin:
        pts = pts[np.any(pts != 0, axis=1)]
    return pts


def epstein_zeta(d: int, sigma: float) -> float:
    """``sum_{m in Z^d, m != 0} |m|^(-2 sigma)``, continued to all ``sigma != d/2``."""
    if abs(sigma - d / 2) < 1e-13:
        raise ValueError("Epstein zeta has a pole at sigma = d/2")
    if abs(sigma) < 1e-14:
        return -1.0
    m = _images(d, _REAL_IMAGES, True)
    q = np.pi * np.sum(m**2, axis=1)
    real = np.sum(q ** (-sigma) * upper_gamma(sigma, q))
    dual = np.sum(q ** (sigma - d / 2) * upper_gamma(d / 2 - sigma, q))
    bracket = real + dual + 1.0 / (sigma - d / 2) - 1.0 / sigma
    return float(np.pi**sigma * special.rgamma(sigma) * bracket)


def _wrap(a: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return a - np.round(a)


def shifted_power_sum(sigma: float, a) -> np.ndarray:
    """``Z(a; sigma)`` for each row of ``a`` (shape ``(N, d)``); ``a`` must avoid the lattice."""
    a = _wrap(a)
    d = a.shape[1]
    out = np.zeros(a.shape[0])
    for m in _images(d, _REAL_IMAGES, False):
        q = np.pi * np.sum((m + a) ** 2, axis=1)
        out += q ** (-sigma) * upper_gamma(sigma, q)
    for k in _images(d, _DUAL_IMAGES, True):
        qk = np.pi * np.dot(k, k)
        w = qk ** (sigma - d / 2) * upper_gamma(d / 2 - sigma, qk)
        out += w * np.cos(2 * np.pi * (a @ k))
    out += 1.0 / (sigma - d / 2)
    return np.pi**sigma / special.gamma(sigma) * out


def shifted_odd_sum(tau: float, a) -> np.ndarray:
    """``sum_m (m + a) |m + a|^(-2 tau - 2)`` for each row of ``a``; returns ``(N, d)``.

    Components with ``a_j = 1/2`` vanish by symmetry and are returned as exact zeros.
    """
    a = _wrap(a)
    d = a.shape[1]
    grad = np.zeros_like(a)
    for m in _images(d, _REAL_IMAGES, False):
        y = m + a
        q = np.pi * np.sum(y**2, axis=1)
        dq = -tau * q ** (-tau - 1) * upper_gamma(tau, q) - np.exp(-q) / q
        grad += 2 * np.pi * y * dq[:, None]
    for k in _images(d, _DUAL_IMAGES, True):
        qk = np.pi * np.dot(k, k)
        w = qk ** (tau - d / 2) * upper_gamma(d / 2 - tau, qk)
        grad -= 2 * np.pi * np.outer(w * np.sin(2 * np.pi * (a @ k)), k)
    grad *= np.pi**tau / special.gamma(tau)
    out = -grad / (2 * tau)
    out[np.isclose(np.abs(a), 0.5, rtol=0, atol=1e-14) | (a == 0)] = 0.0
    return out
