"""Shared numerical kernels: Hermitian inner products, the rank-1 inverse
correlation update at the core of every RLS variant, and the reference
input generators.

All vectors are complex128 column data stored as 1-D numpy arrays. The
inverse correlation matrix P is kept exactly Hermitian by re-symmetrizing
after every rank-1 update; without that, the drift of the asymmetric part
compounds over tens of thousands of updates and eventually corrupts the
gain direction.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NumericalBreakdownError",
    "herm_dot",
    "rank1_gain_update",
    "make_rng",
    "bpsk_stream",
    "cgauss_stream",
]


class NumericalBreakdownError(RuntimeError):
    """Raised when the gain denominator is non-positive or non-finite."""


def herm_dot(a, b):
    """Hermitian inner product conj(a) . b of two equal-length vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"herm_dot needs equal-length 1-D vectors, got {a.shape} and {b.shape}")
    return complex(np.vdot(a, b))


def rank1_gain_update(P, x, lam):
    """One exponentially-weighted RLS update of the inverse correlation matrix.

    Computes the gain vector k = P x / (lam + x^H P x), the updated matrix
    P' = (P - k x^H P) / lam re-symmetrized as (P' + P'^H) / 2, and the
    a-posteriori conversion factor T = 1 - k^H x.

    Parameters
    ----------
    P : (M, M) complex ndarray
        Current inverse correlation matrix, Hermitian positive definite.
    x : (M,) complex ndarray
        Regressor vector.
    lam : float
        Forgetting factor, 0 < lam <= 1.

    Returns
    -------
    k : (M,) complex ndarray
    P_next : (M, M) complex ndarray
    T : complex

    Raises
    ------
    NumericalBreakdownError
        If lam + x^H P x is not finite and strictly positive.
    ValueError
        On shape mismatch between P and x.
    """
    P = np.asarray(P)
    x = np.asarray(x)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or x.shape != (P.shape[0],):
        raise ValueError(f"shape mismatch: P {P.shape}, x {x.shape}")

    Px = P @ x
    # x^H P x is real for Hermitian P; the denominator must stay > 0 for P
    # to remain positive definite.
    denom = lam + np.vdot(x, Px).real
    if not np.isfinite(denom) or denom <= 0.0:
        raise NumericalBreakdownError(f"gain denominator {denom!r} is not positive and finite")

    k = Px / denom
    # x^H P == (P x)^H while P is Hermitian, saving a matrix-vector product.
    P_next = (P - np.outer(k, Px.conj())) / lam
    P_next = (P_next + P_next.conj().T) / 2
    T = 1.0 - complex(np.vdot(k, x))
    return k, P_next, T


def make_rng(seed):
    """Deterministic generator for a given integer seed."""
    return np.random.default_rng(seed)


def bpsk_stream(rng, n):
    """n unit-modulus +/-1 symbols as complex128."""
    return (2.0 * rng.integers(0, 2, size=n) - 1.0).astype(np.complex128)


def cgauss_stream(rng, n, variance=1.0):
    """n circular complex Gaussian samples with the given total variance."""
    if variance < 0.0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
