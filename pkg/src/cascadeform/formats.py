"""Plain-text complex matrix format and small JSON encoding helpers.

A matrix file holds one row per line; each entry is ``re,im`` and entries
are separated by whitespace. Floats use the shortest round-trip repr.
"""

import numpy as np

from .exceptions import DomainError

__all__ = ["pair", "pairs", "from_pairs", "matrix_to_pairs", "matrix_from_pairs",
           "write_matrix_text", "read_matrix_text"]


def pair(z):
    z = complex(z)
    return [z.real, z.imag]


def pairs(v):
    return [pair(z) for z in np.asarray(v).ravel()]


def from_pairs(p):
    a = np.asarray(p, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise DomainError("expected a list of [re, im] pairs")
    return a[:, 0] + 1j * a[:, 1]


def matrix_to_pairs(m):
    return [pairs(row) for row in np.asarray(m)]


def matrix_from_pairs(rows):
    out = np.array([from_pairs(r) for r in rows])
    if out.ndim != 2:
        raise DomainError("ragged matrix rows")
    return out


def write_matrix_text(path, m):
    m = np.asarray(m, dtype=np.complex128)
    with open(path, "w") as fh:
        for row in m:
            fh.write(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
            fh.write("\n")


def read_matrix_text(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append([complex(float(a), float(b))
                             for a, b in (tok.split(",") for tok in line.split())])
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: malformed entry ({exc})") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DomainError(f"{path}: matrix must be square and non-empty")
    return np.array(rows, dtype=np.complex128)
