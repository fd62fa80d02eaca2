"""Fourier-multiplier operators on the torus.

Convention: ``u_hat(k) = h^d * sum_x u(x) exp(-i xi_k . x)`` with inverse
``L^-d * sum_k``, ``xi_k = 2 pi k / L`` and ``k`` in ``(-n/2, n/2]`` on every
axis (the Nyquist index is ``+n/2``).  The normalisation cancels in every
multiplier, so the FFT is used unscaled.

Odd symbols (gradients, divergences) are set to zero on the Nyquist plane of
their own axis.  There the wavevector is its own conjugate partner, so an odd
symbol cannot be Hermitian and would otherwise produce an imaginary output.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .errors import NumericalError, ValidationError
from .grid import GridSpec, ScalarField, VectorField

__all__ = [
    "MultiplierTable",
    "multiplier_table",
    "frac_laplacian",
    "riesz_potential",
    "frac_gradient",
    "frac_divergence",
    "classical_gradient",
    "classical_divergence",
    "apply_multiplier",
    "set_workers",
    "corrupted_divergence",
]

_WORKERS = 1
_DIV_FAULT = 0.0
IMAG_TOL = 1e-10


def set_workers(n: int) -> None:
    """Cap the FFT thread count.  Results do not depend on it."""
    global _WORKERS
    _WORKERS = max(1, int(n))


@contextlib.contextmanager
def corrupted_divergence(amount: float = 1e-3):
    """Test hook: perturb the divergence symbol so adjointness breaks."""
    global _DIV_FAULT
    old = _DIV_FAULT
    _DIV_FAULT = float(amount)
    try:
        yield
    finally:
        _DIV_FAULT = old


@dataclass(frozen=True, eq=False)
class MultiplierTable:
    """Wavevectors ``xi_k`` (shape ``(d, n, ..., n)``) and their norms for one grid."""

    spec: GridSpec
    wavevectors: np.ndarray
    norm: np.ndarray
    nyquist: np.ndarray  # (d, n, ..., n) bool: k_j == n/2

    @classmethod
    def build(cls, spec: GridSpec) -> "MultiplierTable":
        n = spec.n
        k1 = np.fft.fftfreq(n, d=1.0 / n)
        k1[n // 2] = n // 2
        ks = np.meshgrid(*([k1] * spec.d), indexing="ij")
        xi = np.stack([2 * np.pi * k / spec.L for k in ks])
        nyq = np.stack([k == n // 2 for k in ks])
        norm = np.sqrt(np.sum(xi**2, axis=0))
        for a in (xi, norm, nyq):
            a.setflags(write=False)
        return cls(spec, xi, norm, nyq)

    def power(self, sigma: float, zero_mode: float) -> np.ndarray:
        """``|xi|^sigma`` with the value at ``xi = 0`` set explicitly."""
        out = np.empty_like(self.norm)
        nz = self.norm > 0
        out[nz] = self.norm[nz] ** sigma
        out[~nz] = zero_mode
        return out


@lru_cache(maxsize=32)
def multiplier_table(spec: GridSpec) -> MultiplierTable:
    return MultiplierTable.build(spec)


@lru_cache(maxsize=64)
def _grad_symbols(spec: GridSpec, s: float) -> np.ndarray:
    t = multiplier_table(spec)
    radial = t.power(s - 1.0, 0.0)
    sym = 1j * t.wavevectors * radial
    sym[t.nyquist] = 0.0
    sym.setflags(write=False)
    return sym


def _fft(a: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(a, workers=_WORKERS)


def _ifft_real(c: np.ndarray) -> np.ndarray:
    z = scipy.fft.ifftn(c, workers=_WORKERS)
    re = z.real
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if resid > IMAG_TOL * max(1.0, float(np.max(np.abs(re)))):
        raise NumericalError(f"imaginary residue {resid:.3e} after inverse transform")
    return np.ascontiguousarray(re)


def apply_multiplier(f: ScalarField, symbol: np.ndarray) -> ScalarField:
    """Apply a Hermitian Fourier symbol to a real field."""
    return ScalarField(f.spec, _ifft_real(symbol * _fft(f.values)))


def _check_order(name: str, value: float, lo: float, hi: float, lo_open=True) -> float:
    value = float(value)
    ok = (value > lo if lo_open else value >= lo) and value <= hi
    if not ok:
        bracket = "(" if lo_open else "["
        raise ValidationError(f"{name} must lie in {bracket}{lo}, {hi}], got {value}")
    return value


def frac_laplacian(f: ScalarField, sigma: float) -> ScalarField:
    """Fractional Laplacian of order ``sigma``: multiplier ``|xi|^sigma``.

    The zero mode is annihilated, so the mean is removed.
    """
    sigma = _check_order("sigma", sigma, 0.0, 2.0)
    return apply_multiplier(f, multiplier_table(f.spec).power(sigma, 0.0))


def _riesz(f: ScalarField, sigma: float) -> ScalarField:
    # unrestricted order in [0, 2]; used for preconditioning
    if sigma == 0.0:
        return f
    return apply_multiplier(f, multiplier_table(f.spec).power(-sigma, 1.0))


def riesz_potential(f: ScalarField, sigma: float) -> ScalarField:
    """Riesz potential: multiplier ``|xi|^-sigma`` off zero, identity on the mean."""
    sigma = _check_order("sigma", sigma, 0.0, 1.0)
    return _riesz(f, sigma)


def frac_gradient(f: ScalarField, s: float) -> VectorField:
    """Fractional gradient: component ``j`` has symbol ``i xi_j |xi|^(s-1)``."""
    s = _check_order("s", s, 0.0, 1.0)
    sym = _grad_symbols(f.spec, s)
    fh = _fft(f.values)
    return VectorField(
        f.spec, tuple(ScalarField(f.spec, _ifft_real(sym[j] * fh)) for j in range(f.spec.d))
    )


def frac_divergence(G: VectorField, s: float) -> ScalarField:
    """Fractional divergence ``sum_j d^s_j G_j``; the negative adjoint of :func:`frac_gradient`."""
    s = _check_order("s", s, 0.0, 1.0)
    sym = _grad_symbols(G.spec, s)
    if _DIV_FAULT:
        t = multiplier_table(G.spec)
        sym = sym * (1.0 + _DIV_FAULT * t.norm / t.norm.max())
    acc = np.zeros(G.spec.shape, dtype=complex)
    for j, comp in enumerate(G.components):
        acc += sym[j] * _fft(comp.values)
    return ScalarField(G.spec, _ifft_real(acc))


def classical_gradient(f: ScalarField) -> VectorField:
    """Spectral gradient (the ``s = 1`` fractional gradient)."""
    return frac_gradient(f, 1.0)


def classical_divergence(G: VectorField) -> ScalarField:
    return frac_divergence(G, 1.0)
