"""Input validation helpers shared by the estimators and functional API."""

import numpy as np

from .exceptions import DomainError


def check_complex_vector(x, name="x", n=None):
    """Return ``x`` as a finite 1-D complex128 array.

    Accepts anything ``np.asarray`` accepts, plus an ``(n, 2)`` real array
    of ``[re, im]`` pairs.
    """
    arr = np.asarray(x)
    if arr.ndim == 2 and arr.shape[1] == 2 and not np.iscomplexobj(arr):
        arr = arr[:, 0] + 1j * arr[:, 1]
    arr = np.asarray(arr, dtype=np.complex128)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DomainError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_complex_matrix(m, name="matrix", square=False):
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DomainError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DomainError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_formation_basis(xi, n=None, name="basis"):
    """Validate a formation basis: finite and pairwise distinct entries."""
    xi = check_complex_vector(xi, name=name, n=n)
    if xi.shape[0] < 2:
        raise DomainError(f"{name} needs at least two agents")
    order = np.lexsort((xi.imag, xi.real))
    s = xi[order]
    dup = np.flatnonzero(s[1:] == s[:-1])
    if dup.size:
        a, b = sorted((int(order[dup[0]]), int(order[dup[0] + 1])))
        raise DomainError(
            f"{name} entries must be pairwise distinct; agents {a} and {b} share {s[dup[0]]}"
        )
    return xi


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        raise DomainError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value}")
    return value
