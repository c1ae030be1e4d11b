import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pertcrit.errors import InputError, NotHermitian, SpectraOverlap
from pertcrit.linalg import (
    SylvesterSolver,
    eig_general,
    eig_hermitian,
    solve_sylvester,
    solve_sylvester_diagonal,
)
from conftest import random_hermitian


def test_eig_hermitian_ascending_and_orthonormal():
    a = random_hermitian(np.random.default_rng(1), 6)
    d = eig_hermitian(a)
    assert np.all(np.diff(d.values) >= 0)
    assert np.allclose(d.vectors.conj().T @ d.vectors, np.eye(6), atol=1e-12)
    assert np.allclose(a @ d.vectors, d.vectors * d.values, atol=1e-12)


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        eig_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_general_matches_characteristic_roots():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    assert np.allclose(np.sort(eig_general(a).values.real), [-2.0, -1.0])


def test_as_matrix_validation():
    with pytest.raises(InputError):
        eig_general(np.ones((2, 3)))
    with pytest.raises(InputError):
        eig_general(np.array([[np.nan]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 7), st.integers(1, 7))
def test_bartels_stewart_residual(seed, n, m):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)) + 10.0 * np.eye(m)
    c = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    y = solve_sylvester(a, b, c)
    assert np.linalg.norm(a @ y - y @ b - c) <= 1e-10 * np.linalg.norm(c) * (1 + np.linalg.norm(y))


def test_bartels_stewart_matches_kronecker_solve():
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 4)
    b = 1.0001 * a.T
    c = rng.standard_normal((4, 4)) + 0j
    y = SylvesterSolver(a, b).solve(c)
    k = np.kron(np.eye(4), a) - np.kron(b.T, np.eye(4))
    ref = np.linalg.solve(k, c.ravel(order="F")).reshape(4, 4, order="F")
    assert np.allclose(y, ref, atol=1e-9)


def test_overlapping_spectra_raise():
    a = np.diag([1.0, 2.0])
    with pytest.raises(SpectraOverlap) as info:
        SylvesterSolver(a, a)
    assert info.value.min_divisor < info.value.tol


def test_diagonal_solver_matches_general():
    h = np.array([0.5, 1.3, 2.9, 4.1])
    c = np.random.default_rng(5).standard_normal((4, 4)) + 0j
    y = solve_sylvester_diagonal(h, 1e-4, c)
    ref = solve_sylvester(np.diag(h), (1 + 1e-4) * np.diag(h), c)
    assert np.allclose(y, ref, atol=1e-10)


def test_diagonal_solver_zero_level_overlaps():
    with pytest.raises(SpectraOverlap):
        solve_sylvester_diagonal(np.array([0.0, 1.0]), 1e-4, np.ones((2, 2)))
