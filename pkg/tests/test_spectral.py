import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from cascadeform import (DomainError, NumericalError, build_laplacian, eigenvalues, kernel_residuals,
                         numerical_rank, propagate_exact, synthesize_weights)
from cascadeform.spectral import hessenberg

from conftest import complete, cycle, random_basis


def _rand_complex(rng, n, scale=1.0):
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def _match(a, b):
    """Greedy nearest pairing; returns the largest distance."""
    b = list(b)
    worst = 0.0
    for x in a:
        k = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b.pop(k)))
    return worst


def _charpoly(m):
    """Faddeev-LeVerrier coefficients of det(lambda I - m), highest power first."""
    n = m.shape[0]
    coeffs = [1.0 + 0j]
    mk = np.zeros_like(m)
    for k in range(1, n + 1):
        mk = m @ mk + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(m @ mk) / k)
    return np.array(coeffs)


def test_eigenvalue_examples():
    s = eigenvalues(np.diag([1, 2 + 3j]))
    assert np.allclose(s.eigenvalues, [1, 2 + 3j]) and s.zero_count == 0
    s = eigenvalues(np.zeros((2, 2)))
    assert s.zero_count == 2 and np.all(s.eigenvalues == 0)
    s = eigenvalues(np.array([[2, -1], [-1, 2]]))
    assert np.allclose(s.eigenvalues, [1, 3], atol=1e-12)


def test_eigenvalue_sort_order():
    s = eigenvalues(np.diag([3, 1 + 2j, 1 - 2j, -1]))
    assert np.allclose(s.eigenvalues, [-1, 1 - 2j, 1 + 2j, 3])


def test_eigenvalues_reject_non_square_and_nan():
    with pytest.raises(DomainError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(DomainError):
        eigenvalues(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_hessenberg_is_similar():
    rng = np.random.default_rng(2)
    a = _rand_complex(rng, 7)
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0)
    assert abs(np.trace(h) - np.trace(a)) < 1e-10


def test_trace_property_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 17))
        m = _rand_complex(rng, n, scale=rng.uniform(0.1, 10))
        s = eigenvalues(m)
        tol = 1e-8 * max(1.0, np.linalg.norm(m))
        assert abs(s.eigenvalues.sum() - np.trace(m)) <= tol


def test_small_matrices_match_characteristic_polynomial():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 5))
        m = _rand_complex(rng, n)
        roots = np.roots(_charpoly(m))
        assert _match(eigenvalues(m).eigenvalues, roots) <= 1e-7


def test_residual_bound_by_inverse_iteration():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 13))
        m = _rand_complex(rng, n)
        fro = np.linalg.norm(m)
        for lam in eigenvalues(m).eigenvalues:
            shift = m - (lam + 1e-10 * fro) * np.eye(n)
            v = rng.standard_normal(n) + 0j
            for _ in range(3):
                v = np.linalg.solve(shift, v)
                v /= np.linalg.norm(v)
            assert np.linalg.norm(m @ v - lam * v) <= 1e-8 * max(1.0, fro)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=10))
def test_triangular_spectrum_is_diagonal(diag):
    n = len(diag)
    m = np.triu(np.full((n, n), 0.5 + 0.25j), 1) + np.diag(diag)
    got = eigenvalues(m).eigenvalues
    assert _match(got, diag) <= 1e-6 * max(1.0, np.linalg.norm(m))


def test_rank_examples():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.zeros((3, 3))) == 0
    rng = np.random.default_rng(4)
    g, xi = complete(4), random_basis(rng, 4)
    lap = build_laplacian(g, synthesize_weights(g, xi, 0), xi)
    assert numerical_rank(lap.matrix) == 2


def test_rank_matches_exact_rank():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        r = int(rng.integers(0, n + 1))
        a = rng.integers(-3, 4, (n, r)) @ rng.integers(-3, 4, (r, n)) if r else np.zeros((n, n), int)
        exact = sympy.Matrix(a.tolist()).rank()
        assert numerical_rank(a.astype(complex)) == exact


def test_rank_matches_svd_on_random_low_rank():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(2, 16))
        r = int(rng.integers(1, n + 1))
        a = (rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))) @ \
            (rng.standard_normal((r, n)) + 1j * rng.standard_normal((r, n)))
        sv = np.linalg.svd(a, compute_uv=False)
        assert numerical_rank(a) == int(np.sum(sv > 1e-8 * sv[0])) == r


def test_rank_plus_structural_zeros():
    rng = np.random.default_rng(9)
    for n in range(4, 12):
        g, xi = cycle(n), random_basis(rng, n)
        lap = build_laplacian(g, synthesize_weights(g, xi, n), xi)
        assert numerical_rank(lap.matrix) + eigenvalues(lap.matrix).zero_count == n


def test_kernel_residual_examples(triangle):
    assert kernel_residuals(np.zeros((3, 3)), [0, 1, 2]) == (0.0, 0.0)
    assert kernel_residuals(np.eye(3), np.ones(3)) == (1.0, 1.0)
    g, xi = triangle
    lap = build_laplacian(g, synthesize_weights(g, xi, 0), xi)
    r1, rxi = kernel_residuals(lap.matrix, xi)
    assert r1 <= 1e-12 and rxi <= 1e-12


def test_kernel_residuals_length_mismatch():
    with pytest.raises(DomainError):
        kernel_residuals(np.eye(3), [1, 2])


def test_propagate_exact_examples():
    assert np.allclose(propagate_exact(np.diag([1.0]), [1], np.log(2)), [0.5])
    z0 = np.array([1 + 2j, -3j])
    assert np.allclose(propagate_exact(np.zeros((2, 2)), z0, 7.3), z0)
    assert np.allclose(propagate_exact(np.diag([1j * np.pi]), [1], 1.0), [-1])


def test_propagate_exact_rejects_defective():
    with pytest.raises(NumericalError):
        propagate_exact(np.array([[1.0, 1.0], [0.0, 1.0]]), [1, 1], 1.0)
