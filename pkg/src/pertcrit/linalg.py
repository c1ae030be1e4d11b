"""Dense complex linear algebra: eigensolvers and Sylvester solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from pertcrit.errors import InputError, NoConvergence, NotHermitian, SpectraOverlap

HERMITIAN_RTOL = 1e-12
DIVISOR_RTOL = 1e-13


@dataclass(frozen=True)
class EigenDecomposition:
    values: NDArray[np.complexfloating]
    vectors: NDArray[np.complexfloating] | None = None

    def __len__(self) -> int:
        return len(self.values)


def as_matrix(a: ArrayLike, *, square: bool = True, name: str = "matrix") -> NDArray:
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    return arr


def hermitian_defect(a: NDArray) -> float:
    """Relative size of the anti-Hermitian part, ``||A - A^H|| / ||A||``."""
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / scale)


def is_hermitian(a: NDArray, rtol: float = HERMITIAN_RTOL) -> bool:
    return hermitian_defect(a) <= rtol


def eig_hermitian(a: ArrayLike) -> EigenDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    a = as_matrix(a)
    if not is_hermitian(a):
        raise NotHermitian(f"matrix is not Hermitian (defect {hermitian_defect(a):.2e})")
    try:
        w, v = sla.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigh failed: {exc}") from exc
    return EigenDecomposition(w, v)


def eig_general(a: ArrayLike, want_vectors: bool = False) -> EigenDecomposition:
    """All eigenvalues of a general square matrix, unsorted."""
    a = as_matrix(a)
    try:
        if want_vectors:
            w, v = sla.eig(a, check_finite=False)
            return EigenDecomposition(w.astype(complex), v)
        w = sla.eigvals(a, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eig failed: {exc}") from exc
    return EigenDecomposition(w.astype(complex))


def _divisor_tolerance(a: NDArray, b: NDArray | None = None) -> float:
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if b is not None and b.size:
        scale = max(scale, float(np.max(np.abs(b))))
    return DIVISOR_RTOL * max(scale, np.finfo(float).tiny)


class SylvesterSolver:
    """Bartels-Stewart solver for ``A Y - Y B = C`` with fixed ``A`` and ``B``.

    Both coefficient matrices are reduced once to complex Schur form,
    ``A = Q T Q^H`` and ``B = U S U^H``; each call to :meth:`solve` then
    transforms the right-hand side, solves the triangular system
    ``T Z - Z S = Q^H C U`` and transforms back. All steps are O(n^3).
    """

    def __init__(self, a: ArrayLike, b: ArrayLike, tol_div: float | None = None):
        a = as_matrix(a, name="A")
        b = as_matrix(b, name="B")
        self.shape = (a.shape[0], b.shape[0])
        self.tol_div = _divisor_tolerance(a, b) if tol_div is None else tol_div
        try:
            self._t, self._q = sla.schur(a.astype(complex), output="complex")
            self._s, self._u = sla.schur(b.astype(complex), output="complex")
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"Schur reduction failed: {exc}") from exc
        alpha = np.diag(self._t)
        beta = np.diag(self._s)
        self.divisors = alpha[:, None] - beta[None, :]
        self.min_divisor = float(np.min(np.abs(self.divisors))) if self.divisors.size else np.inf
        if self.min_divisor < self.tol_div:
            raise SpectraOverlap(
                f"spectra of A and B overlap: min |alpha_i - beta_j| = {self.min_divisor:.3e} "
                f"< tol_div = {self.tol_div:.3e}",
                self.min_divisor,
                self.tol_div,
            )

    def solve(self, c: ArrayLike) -> NDArray[np.complexfloating]:
        c = np.asarray(c, dtype=complex)
        if c.shape != self.shape:
            raise InputError(f"C has shape {c.shape}, expected {self.shape}")
        f = self._q.conj().T @ c @ self._u
        z, scale, info = sla.lapack.ztrsyl(self._t, self._s, f, isgn=-1)
        if info < 0:
            raise NoConvergence(f"ztrsyl argument {-info} invalid")
        if scale != 1.0:
            z = z / scale
        return self._q @ z @ self._u.conj().T

    def condition_report(self) -> dict[str, float]:
        return {"min_divisor": self.min_divisor, "tol_div": self.tol_div}


def solve_sylvester(a: ArrayLike, b: ArrayLike, c: ArrayLike) -> NDArray[np.complexfloating]:
    """Solve ``A Y - Y B = C`` by Bartels-Stewart on complex Schur forms."""
    return SylvesterSolver(a, b).solve(c)


def diagonal_divisors(h0diag: ArrayLike, eps: float) -> NDArray[np.floating]:
    """``D[j, i] = H0_jj - (1 + eps) H0_ii``; entry ``[j, i]`` divides ``C[j, i]``."""
    h = np.asarray(h0diag)
    return h[:, None] - (1.0 + eps) * h[None, :]


def solve_sylvester_diagonal(
    h0diag: ArrayLike, eps: float, c: ArrayLike, tol_div: float | None = None
) -> NDArray[np.complexfloating]:
    """Solve ``H0 Y - (1 + eps) Y H0^T = C`` for diagonal ``H0`` in O(N^2).

    Column ``i`` of ``Y`` is ``diag(d_1..d_N) c_i`` with
    ``d_j = 1 / (H0_jj - (1 + eps) H0_ii)``.
    """
    h = np.asarray(h0diag)
    div = diagonal_divisors(h, eps)
    if tol_div is None:
        tol_div = DIVISOR_RTOL * max(float(np.max(np.abs(h))), np.finfo(float).tiny)
    smallest = float(np.min(np.abs(div)))
    if smallest < tol_div:
        raise SpectraOverlap(
            f"diagonal Sylvester divisor {smallest:.3e} below tol_div {tol_div:.3e}",
            smallest,
            tol_div,
        )
    return np.asarray(c) / div
