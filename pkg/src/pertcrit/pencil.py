"""Hermitian pencils ``H(lam) = H0 + lam V`` and the regularized Kronecker operators.

For a regularization ``eps > 0`` the two N^2 x N^2 operators are

    Delta0(eps) = -I (x) V  + (1 + eps) V  (x) I
    Delta1(eps) =  I (x) H0 - (1 + eps) H0 (x) I

and ``lam`` is a pencil eigenvalue (``Delta1 v = lam Delta0 v``) exactly when
``H(lam)`` has two eigenvalues of the form ``E`` and ``(1 + eps) E``.
Vectors are column-stacked: ``vec(X) = X.ravel(order="F")``, so that
``(B^T (x) A) vec(X) = vec(A X B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pertcrit.errors import InputError, NotHermitian, SpectraOverlap, TooLarge
from pertcrit.linalg import (
    DIVISOR_RTOL,
    HERMITIAN_RTOL,
    SylvesterSolver,
    as_matrix,
    diagonal_divisors,
    hermitian_defect,
)

DEFAULT_EPS = 1e-4
DENSE_CAP = 40
DIAGONAL_RTOL = 1e-14


def vec(x: NDArray) -> NDArray:
    return np.asarray(x).ravel(order="F")


def unvec(x: NDArray, n: int) -> NDArray:
    return np.asarray(x).reshape((n, n), order="F")


@dataclass(frozen=True, eq=False)
class HermitianPencil:
    """The pair ``(H0, V)`` defining ``H(lam) = H0 + lam V``.

    ``labels`` name the unperturbed basis states (one per row of ``H0``);
    ``meta`` carries provenance such as model name, basis size, ``lambda_phys``.
    """

    h0: NDArray
    v: NDArray
    labels: list[str] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        h0 = as_matrix(self.h0, name="H0")
        v = as_matrix(self.v, name="V")
        if h0.shape != v.shape:
            raise InputError(f"H0 {h0.shape} and V {v.shape} differ in shape")
        for name, m in (("H0", h0), ("V", v)):
            defect = hermitian_defect(m)
            if defect > HERMITIAN_RTOL:
                raise NotHermitian(f"{name} is not Hermitian (defect {defect:.2e})")
        if self.labels is not None:
            labels = [str(s) for s in self.labels]
            if len(labels) != h0.shape[0]:
                raise InputError(f"{len(labels)} labels for N = {h0.shape[0]}")
            object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.h0.shape[0]

    @property
    def h0_is_diagonal(self) -> bool:
        off = self.h0 - np.diag(np.diag(self.h0))
        return float(np.linalg.norm(off)) <= DIAGONAL_RTOL * float(np.linalg.norm(self.h0))

    @property
    def lambda_phys(self) -> float:
        return float(self.meta.get("lambda_phys", 1.0))

    def at(self, lam: complex) -> NDArray:
        """The matrix ``H0 + lam V``."""
        if np.iscomplexobj(lam) and complex(lam).imag == 0.0:
            lam = complex(lam).real
        return self.h0 + lam * self.v

    def unperturbed_levels(self) -> tuple[NDArray, list[str]]:
        """Ascending eigenvalues of ``H0`` with a label per level.

        For diagonal ``H0`` the basis labels are carried over to the levels;
        otherwise levels are named ``E0, E1, ...``.
        """
        if self.h0_is_diagonal:
            d = np.real(np.diag(self.h0))
            order = np.argsort(d, kind="stable")
            names = self.labels or [f"E{k}" for k in range(self.n)]
            return d[order], [names[k] for k in order]
        w = np.linalg.eigvalsh(self.h0)
        return w, [f"E{k}" for k in range(self.n)]

    def v_rank(self, rtol: float = 1e-10) -> int:
        s = np.linalg.svd(self.v, compute_uv=False)
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > rtol * s[0]))


class DeltaOperator:
    """Structured action of ``(Delta1 - shift Delta0)^{-1} Delta0`` on vec'd matrices.

    With ``shift = 0`` this is the map ``y = Delta1^{-1} Delta0 x`` whose
    eigenvalues are ``1 / lam``. A nonzero shift ``s`` gives eigenvalues
    ``1 / (lam - s)``, which is what inverse iteration needs. Because
    ``Delta1 - s Delta0 = I (x) H(s) - (1 + eps) H(s) (x) I``, every application
    reduces to one Sylvester equation

        H(s) Y - (1 + eps) Y H(s)^T = -V X + (1 + eps) X V^T

    with ``x = vec(X)``, ``y = vec(Y)``. The O(N^2) diagonal path is used
    when ``H(s)`` is diagonal (auto-detected); otherwise Bartels-Stewart with
    Schur factors cached at construction.
    """

    def __init__(self, pencil: HermitianPencil, eps: float = DEFAULT_EPS, shift: complex = 0.0):
        if not eps > 0.0:
            raise InputError(f"eps must be positive, got {eps}")
        self.pencil = pencil
        self.eps = float(eps)
        self.shift = complex(shift)
        n = pencil.n
        self.n = n
        a = pencil.at(self.shift) if self.shift != 0 else pencil.h0
        self._vt = pencil.v.T
        off = a - np.diag(np.diag(a))
        self.h0_diagonal = float(np.linalg.norm(off)) <= DIAGONAL_RTOL * float(np.linalg.norm(a))
        if self.h0_diagonal:
            self._diag = np.diag(a).copy()
            div = diagonal_divisors(self._diag, self.eps)
            self.tol_div = DIVISOR_RTOL * max(float(np.max(np.abs(self._diag))), np.finfo(float).tiny)
            self.min_divisor = float(np.min(np.abs(div)))
            if self.min_divisor < self.tol_div:
                raise SpectraOverlap(
                    f"diagonal divisor {self.min_divisor:.3e} below tol_div {self.tol_div:.3e}",
                    self.min_divisor,
                    self.tol_div,
                )
            self._inv_div = 1.0 / div
            self._solver = None
        else:
            self._solver = SylvesterSolver(a, (1.0 + self.eps) * a.T)
            self.tol_div = self._solver.tol_div
            self.min_divisor = self._solver.min_divisor

    @property
    def size(self) -> int:
        return self.n * self.n

    def rhs(self, x: NDArray) -> NDArray:
        """``Delta0 x`` as an N x N matrix: ``-V X + (1 + eps) X V^T``."""
        X = unvec(x, self.n)
        return -self.pencil.v @ X + (1.0 + self.eps) * (X @ self._vt)

    def apply(self, x: ArrayLike) -> NDArray[np.complexfloating]:
        x = np.asarray(x)
        if x.shape != (self.size,):
            raise InputError(f"vector of length {self.size} expected, got shape {x.shape}")
        c = self.rhs(x)
        if self._solver is None:
            y = c * self._inv_div
        else:
            y = self._solver.solve(c)
        return vec(y)

    __call__ = apply

    def diagnostics(self) -> dict[str, Any]:
        return {
            "path": "diagonal" if self.h0_diagonal else "bartels-stewart",
            "min_divisor": self.min_divisor,
            "tol_div": self.tol_div,
            "eps": self.eps,
            "shift": [self.shift.real, self.shift.imag],
        }


def materialize(op: DeltaOperator, cap: int = DENSE_CAP) -> tuple[NDArray, NDArray]:
    """Explicit ``(Delta0(eps), Delta1(eps))``; for oracles and the dense solver only."""
    return delta_matrices(op.pencil, op.eps, cap=cap)


def delta_matrices(
    pencil: HermitianPencil, eps: float, cap: int = DENSE_CAP
) -> tuple[NDArray, NDArray]:
    n = pencil.n
    if n > cap:
        raise TooLarge(f"N = {n} exceeds the dense cap {cap} (N^2 = {n * n})")
    eye = np.eye(n)
    d0 = -np.kron(eye, pencil.v) + (1.0 + eps) * np.kron(pencil.v, eye)
    d1 = np.kron(eye, pencil.h0) - (1.0 + eps) * np.kron(pencil.h0, eye)
    return d0, d1


__all__ = [
    "DEFAULT_EPS",
    "DENSE_CAP",
    "DeltaOperator",
    "HermitianPencil",
    "delta_matrices",
    "materialize",
    "unvec",
    "vec",
]
