"""Resumable Arnoldi iteration with Krylov-Schur thick restart.

The state maintains the Arnoldi relation ``A Q[:, :k] = Q[:, :k+1] B`` where
``B`` is ``(k+1) x k``. After a restart ``B[:k, :k]`` is upper triangular in
its leading block rather than Hessenberg, which the expansion step handles
transparently. Ritz pairs are extracted from ``B[:k, :k]`` and their residual
norms are ``|B[k, :] y|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from pertcrit.errors import Stagnation

Matvec = Callable[[NDArray], NDArray]

ORTHO_TOL = 1e-10


@dataclass
class ArnoldiState:
    basis: NDArray[np.complexfloating]
    hessenberg: NDArray[np.complexfloating]
    steps_done: int = 0
    matvecs: int = 0
    restarts: int = 0

    @property
    def dim(self) -> int:
        return self.hessenberg.shape[1]

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    def copy(self) -> "ArnoldiState":
        return ArnoldiState(
            self.basis.copy(), self.hessenberg.copy(), self.steps_done, self.matvecs, self.restarts
        )

    def orthogonality_defect(self) -> float:
        q = self.basis
        return float(np.max(np.abs(q.conj().T @ q - np.eye(q.shape[1]))))

    def relation_residual(self, matvec: Matvec) -> float:
        """``||A Q_k - Q_{k+1} B|| / ||B||``, for testing."""
        k = self.dim
        aq = np.column_stack([matvec(self.basis[:, j]) for j in range(k)])
        r = aq - self.basis @ self.hessenberg
        return float(np.linalg.norm(r) / max(np.linalg.norm(self.hessenberg), 1e-300))


def start_state(n: int, seed: int = 0, v0: NDArray | None = None) -> ArnoldiState:
    if v0 is None:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v0 = np.asarray(v0, dtype=complex)
    q = (v0 / np.linalg.norm(v0))[:, None]
    return ArnoldiState(q, np.zeros((1, 0), dtype=complex))


def _orthogonalize(q: NDArray, w: NDArray) -> tuple[NDArray, NDArray]:
    # Classical Gram-Schmidt with one reorthogonalization pass.
    h = q.conj().T @ w
    w = w - q @ h
    h2 = q.conj().T @ w
    w = w - q @ h2
    return w, h + h2


def _expand(state: ArnoldiState, matvec: Matvec, target_dim: int, rng: np.random.Generator) -> None:
    q, b = state.basis, state.hessenberg
    k = b.shape[1]
    if target_dim <= k:
        return
    n = q.shape[0]
    qn = np.zeros((n, target_dim + 1), dtype=complex)
    qn[:, : k + 1] = q
    bn = np.zeros((target_dim + 1, target_dim), dtype=complex)
    bn[: k + 1, :k] = b
    for j in range(k, target_dim):
        w = matvec(qn[:, j])
        state.matvecs += 1
        scale = np.linalg.norm(w)
        w, h = _orthogonalize(qn[:, : j + 1], w)
        bn[: j + 1, j] = h
        beta = np.linalg.norm(w)
        if beta <= ORTHO_TOL * max(scale, 1e-300):
            # Invariant subspace: continue with a fresh direction and a zero coupling.
            bn[j + 1, j] = 0.0
            for _ in range(3):
                r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                r, _ = _orthogonalize(qn[:, : j + 1], r)
                if np.linalg.norm(r) > ORTHO_TOL:
                    break
            qn[:, j + 1] = r / np.linalg.norm(r)
        else:
            bn[j + 1, j] = beta
            qn[:, j + 1] = w / beta
        state.steps_done += 1
    state.basis = qn
    state.hessenberg = bn


def ritz(state: ArnoldiState) -> tuple[NDArray, NDArray, NDArray]:
    """Ritz values, vectors (in basis coordinates) and absolute residuals."""
    k = state.dim
    if k == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex), np.zeros(0)
    w, y = sla.eig(state.hessenberg[:k, :k])
    y = y / np.linalg.norm(y, axis=0)
    res = np.abs(state.hessenberg[k, :] @ y)
    return w, y, res


def _restart(state: ArnoldiState, keep: int) -> None:
    k = state.dim
    t, u = sla.schur(state.hessenberg[:k, :k], output="complex")
    # Order the Schur form by decreasing |theta| and keep the leading block.
    order = np.argsort(-np.abs(np.diag(t)), kind="stable")
    select = np.zeros(k, dtype=bool)
    select[order[:keep]] = True
    t, u, _, p, _, _, info = sla.lapack.ztrsen(select.astype(np.int32), t, u, job="N")
    if info != 0:
        raise Stagnation(f"Schur reordering failed (info={info})", state=state)
    q = state.basis
    new_q = np.empty((q.shape[0], p + 1), dtype=complex)
    new_q[:, :p] = q[:, :k] @ u[:, :p]
    new_q[:, p] = q[:, k]
    new_b = np.zeros((p + 1, p), dtype=complex)
    new_b[:p, :p] = t[:p, :p]
    new_b[p, :] = state.hessenberg[k, :] @ u[:, :p]
    state.basis = new_q
    state.hessenberg = new_b
    state.restarts += 1


def largest_magnitude(
    matvec: Matvec,
    n: int,
    m: int,
    state: ArnoldiState | None = None,
    *,
    tol: float = 1e-8,
    max_dim: int | None = None,
    max_matvecs: int | None = None,
    seed: int = 0,
    check_every: int = 4,
) -> tuple[NDArray, NDArray, ArnoldiState]:
    """Find ``m`` converged eigenvalues of largest magnitude.

    Returns the converged Ritz values (at least ``m`` unless the whole space
    of dimension ``n`` is exhausted), their relative residuals, and the state,
    which can be passed back in with a larger ``m`` to continue.
    """
    m = min(m, n)
    if state is None:
        state = start_state(n, seed)
    rng = np.random.default_rng(seed + 7919 * (state.restarts + 1) + state.matvecs)
    if max_dim is None:
        max_dim = max(2 * m + 20, 3 * m)
    max_dim = min(max_dim, n)
    keep = min(max(2 * m, m + 5), max_dim - 1) if max_dim < n else max_dim
    if max_matvecs is None:
        max_matvecs = state.matvecs + 50 * max_dim + 200
    while True:
        k = state.dim
        if k >= max_dim or k >= n:
            values, _, res = ritz(state)
            done = _converged(values, res, m, tol)
            if done is not None or k >= n:
                return _finish(values, res, tol, m, state)
            _restart(state, keep)
            continue
        target = min(k + check_every, max_dim, n) if k >= m else min(max(m, check_every), max_dim, n)
        _expand(state, matvec, target, rng)
        values, _, res = ritz(state)
        if _converged(values, res, m, tol) is not None or state.dim >= n:
            return _finish(values, res, tol, m, state)
        if state.matvecs >= max_matvecs:
            raise Stagnation(
                f"Arnoldi did not converge {m} Ritz values within {max_matvecs} matvecs",
                state=state,
            )


def _rel_res(values: NDArray, res: NDArray) -> NDArray:
    return res / np.maximum(np.abs(values), 1e-300)


def _converged(values: NDArray, res: NDArray, m: int, tol: float) -> int | None:
    order = np.argsort(-np.abs(values), kind="stable")
    rel = _rel_res(values, res)[order]
    if len(order) < m:
        return None
    if np.all(rel[:m] <= tol):
        return m
    return None


def _finish(values: NDArray, res: NDArray, tol: float, m: int, state: ArnoldiState):
    order = np.argsort(-np.abs(values), kind="stable")
    rel = _rel_res(values, res)[order]
    values = values[order]
    # Leading run of converged values; later ones may be unconverged.
    count = 0
    while count < len(values) and (rel[count] <= tol or state.dim >= state.n):
        count += 1
    return values[:count], rel[:count], state
