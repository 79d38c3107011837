"""Dense complex linear algebra: eigenvalues, numerical rank, kernel checks.

The eigenvalue routine is a plain Hessenberg + shifted QR implementation for
general complex matrices (no symmetry, no conjugate pairing). It is meant
for desk-scale problems, n <= 256.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_matrix, check_complex_vector
from .exceptions import DomainError, NumericalError

__all__ = [
    "Spectrum",
    "default_zero_tol",
    "sort_eigenvalues",
    "hessenberg",
    "qr_eigenvalues",
    "eigenvalues",
    "numerical_rank",
    "kernel_residuals",
    "propagate_exact",
]

MAX_DIM = 256
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by real part, then imaginary part (both ascending).

    Attributes
    ----------
    eigenvalues : ndarray of complex
    zero_count : int
        Number of eigenvalues with ``|lambda| <= tol_zero``.
    tol_zero : float
    """

    eigenvalues: np.ndarray
    zero_count: int
    tol_zero: float

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def zero_mask(self):
        return np.abs(self.eigenvalues) <= self.tol_zero

    @property
    def nonzero(self):
        return self.eigenvalues[~self.zero_mask]

    def to_dict(self):
        return {
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            "zero_count": int(self.zero_count),
            "tol_zero": float(self.tol_zero),
        }


def default_zero_tol(m):
    return 1e-7 * max(1.0, float(np.linalg.norm(m)))


def sort_eigenvalues(values):
    values = np.asarray(values, dtype=np.complex128)
    return values[np.lexsort((values.imag, values.real))]


def hessenberg(a):
    """Reduce ``a`` to upper Hessenberg form by Householder reflections.

    Returns a new array similar to ``a``.
    """
    h = np.array(a, dtype=np.complex128, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        xnorm = np.hypot(abs(x[0]), tail)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * xnorm
        v /= np.linalg.norm(v)
        h[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
        h[k + 2:, k] = 0.0
    return h


def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closer to d
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    mu1 = 0.5 * (a + d) + disc
    mu2 = 0.5 * (a + d) - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def qr_eigenvalues(a, max_sweeps=None):
    """Eigenvalues of a general complex matrix via shifted QR iteration.

    The matrix is first reduced to Hessenberg form; single-shift QR steps
    with Wilkinson shifts (and an exceptional shift every tenth sweep on a
    stalled block) then drive subdiagonal entries to zero. Only the active
    window is updated since no Schur vectors are needed.

    Parameters
    ----------
    a : array_like, shape (n, n)
    max_sweeps : int, optional
        Total QR sweeps allowed; defaults to ``30 * max(n, 10)``.

    Returns
    -------
    ndarray of complex, shape (n,)
        Unsorted eigenvalues.

    Raises
    ------
    NumericalError
        If the iteration does not converge within ``max_sweeps``.
    """
    h = hessenberg(a)
    n = h.shape[0]
    if max_sweeps is None:
        max_sweeps = 30 * max(n, 10)
    hnorm = float(np.linalg.norm(h))
    if hnorm == 0.0:
        return np.zeros(n, dtype=np.complex128)
    small = _EPS * hnorm * 1e-3
    out = np.empty(n, dtype=np.complex128)
    hi = n - 1
    sweeps = 0
    stalled = 0
    while hi >= 0:
        if hi == 0:
            out[0] = h[0, 0]
            break
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if abs(h[lo, lo - 1]) <= max(_EPS * s, small):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            out[hi] = h[hi, hi]
            hi -= 1
            stalled = 0
            continue
        sweeps += 1
        stalled += 1
        if sweeps > max_sweeps:
            raise NumericalError(
                "QR iteration failed to converge",
                {"sweeps": sweeps, "active_block": (lo, hi), "n": n,
                 "converged": n - 1 - hi,
                 "last_subdiagonal": complex(h[hi, hi - 1])},
            )
        if stalled % 10 == 0:
            mu = h[hi, hi] + 0.75 * abs(h[hi, hi - 1]) * (1.0 + 1.0j)
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        w = h[lo:hi + 1, lo:hi + 1]
        m = hi - lo + 1
        idx = np.arange(m)
        w[idx, idx] -= mu
        rots = []
        for k in range(m - 1):
            x, y = w[k, k], w[k + 1, k]
            r = np.hypot(abs(x), abs(y))
            if r == 0.0:
                c, s = 1.0, 0.0
            else:
                c, s = x / r, y / r
            rk = w[k, k:].copy()
            w[k, k:] = np.conj(c) * rk + np.conj(s) * w[k + 1, k:]
            w[k + 1, k:] = -s * rk + c * w[k + 1, k:]
            w[k + 1, k] = 0.0
            rots.append((c, s))
        for k, (c, s) in enumerate(rots):
            top = min(k + 2, m - 1) + 1
            ck = w[:top, k].copy()
            w[:top, k] = c * ck + s * w[:top, k + 1]
            w[:top, k + 1] = -np.conj(s) * ck + np.conj(c) * w[:top, k + 1]
        w[idx, idx] += mu
    return out


def eigenvalues(m, tol_zero=None):
    """Full spectrum of a square complex matrix.

    Parameters
    ----------
    m : array_like, shape (n, n)
        General (non-Hermitian) complex matrix, ``n <= 256``.
    tol_zero : float, optional
        Magnitude at or below which an eigenvalue counts as a structural
        zero. Defaults to ``1e-7 * max(1, ||m||_F)``.

    Returns
    -------
    Spectrum
    """
    m = check_complex_matrix(m, square=True)
    if m.shape[0] > MAX_DIM:
        raise DomainError(f"matrix dimension {m.shape[0]} exceeds supported {MAX_DIM}")
    if tol_zero is None:
        tol_zero = default_zero_tol(m)
    vals = sort_eigenvalues(qr_eigenvalues(m))
    zero_count = int(np.count_nonzero(np.abs(vals) <= tol_zero))
    return Spectrum(vals, zero_count, float(tol_zero))


def numerical_rank(m, rel_tol=1e-8):
    """Rank by Gaussian elimination with complete pivoting.

    Elimination stops at the first pivot whose magnitude falls to or below
    ``rel_tol`` times the first (largest) pivot.
    """
    a = np.array(m, dtype=np.complex128, copy=True)
    if a.ndim != 2:
        raise DomainError("numerical_rank expects a 2-D array")
    rows, cols = a.shape
    ref = None
    rank = 0
    for k in range(min(rows, cols)):
        sub = np.abs(a[k:, k:])
        flat = int(np.argmax(sub))
        i, j = divmod(flat, sub.shape[1])
        piv = sub[i, j]
        if ref is None:
            ref = piv
            if ref == 0.0:
                return 0
        if piv <= rel_tol * ref:
            break
        i += k
        j += k
        if i != k:
            a[[k, i], :] = a[[i, k], :]
        if j != k:
            a[:, [k, j]] = a[:, [j, k]]
        if k + 1 < rows:
            factors = a[k + 1:, k] / a[k, k]
            a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        rank += 1
    return rank


def kernel_residuals(l, xi):
    """Return ``(||L 1||_inf, ||L xi||_inf)``."""
    l = check_complex_matrix(l, name="l", square=True)
    xi = check_complex_vector(xi, name="xi")
    if xi.shape[0] != l.shape[0]:
        raise DomainError(f"xi has length {xi.shape[0]}, matrix is {l.shape[0]}x{l.shape[0]}")
    ones = np.ones(l.shape[0])
    return float(np.max(np.abs(l @ ones))), float(np.max(np.abs(l @ xi)))


def propagate_exact(m, z0, t, max_cond=1e8):
    """Evaluate ``exp(-m t) z0`` through an eigendecomposition of ``m``.

    Intended as an independent reference for the time stepper.

    Raises
    ------
    NumericalError
        When the eigenvector matrix is too ill-conditioned (``> max_cond``).
    """
    m = check_complex_matrix(m, square=True)
    z0 = check_complex_vector(z0, name="z0", n=m.shape[0])
    lam, vecs = np.linalg.eig(m)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > max_cond:
        raise NumericalError(
            "eigenbasis too ill-conditioned for the spectral propagator",
            {"condition_number": float(cond)},
        )
    coeffs = np.linalg.solve(vecs, z0)
    return vecs @ (np.exp(-lam * t) * coeffs)
