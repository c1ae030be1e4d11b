"""Critical values of ``lam``: where ``H0 + lam V`` has a (nearly) double eigenvalue.

Candidates are eigenvalues of the regularized pencil ``Delta1 v = lam Delta0 v``.
Every candidate is validated by re-diagonalizing ``H(lam)`` and then
classified; spurious candidates are kept and labelled, never dropped.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from pertcrit.arnoldi import ArnoldiState, largest_magnitude
from pertcrit.errors import (
    DivergedFromGuess,
    InputError,
    NoConvergence,
    SpectraOverlap,
    Stagnation,
)
from pertcrit.linalg import eig_general
from pertcrit.pencil import DEFAULT_EPS, DENSE_CAP, DeltaOperator, HermitianPencil, delta_matrices

TOL_REAL = 1e-6
LAMBDA_CAP = 1e8
TOL_RITZ = 1e-8
DEDUP_RTOL = 1e-6
DEFAULT_SEED = 20100607


def default_seed() -> int:
    env = os.environ.get("PERTCRIT_SEED")
    return int(env) if env not in (None, "") else DEFAULT_SEED


class Method(str, enum.Enum):
    DENSE = "dense"
    ARNOLDI = "arnoldi"
    INVERSE_ITERATION = "inverse_iteration"


class Status(str, enum.Enum):
    CANDIDATE = "candidate"
    ACCEPTED = "accepted"
    SPURIOUS_REAL = "spurious_real"
    SPURIOUS_RANK = "spurious_rank"
    SPURIOUS_ZERO_EIGENVALUE = "spurious_zero_eigenvalue"


@dataclass(frozen=True)
class CriticalValue:
    """A candidate ``lam`` with its validation data.

    ``rel_gap`` is the smallest relative distance ``|E_a - E_b| / min(|E_a|, |E_b|)``
    between two eigenvalues of ``H(lam)``, from an independent diagonalization;
    ``pair`` are the indices of those eigenvalues in ``energies``.
    ``lambda_eps``/``lambda_half`` keep the raw values when ``lam`` is a
    Richardson-extrapolated estimate.
    """

    lam: complex
    eps: float
    rel_gap: float
    paired_energy: complex
    method: Method
    status: Status = Status.CANDIDATE
    residual: float | None = None
    lambda_eps: complex | None = None
    lambda_half: complex | None = None
    iterations: int | None = None

    @property
    def lambda_(self) -> complex:
        return self.lam

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED

    @property
    def spurious(self) -> bool:
        return self.status.value.startswith("spurious")

    @property
    def extrapolated(self) -> bool:
        return self.lambda_half is not None

    def conjugate(self) -> "CriticalValue":
        c = lambda z: None if z is None else complex(z).conjugate()  # noqa: E731
        return replace(
            self,
            lam=self.lam.conjugate(),
            paired_energy=self.paired_energy.conjugate(),
            lambda_eps=c(self.lambda_eps),
            lambda_half=c(self.lambda_half),
        )


def closest_pair(energies: np.ndarray) -> tuple[int, int, float]:
    """Indices ``(a, b)`` of the pair with minimal relative distance, and that distance."""
    e = np.asarray(energies, dtype=complex)
    if len(e) < 2:
        return 0, 0, np.inf
    diff = np.abs(e[:, None] - e[None, :])
    mag = np.minimum(np.abs(e)[:, None], np.abs(e)[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(mag > 0, diff / mag, np.where(diff > 0, np.inf, 0.0))
    np.fill_diagonal(rel, np.inf)
    a, b = np.unravel_index(int(np.argmin(rel)), rel.shape)
    if abs(e[a]) > abs(e[b]):
        a, b = b, a
    return int(a), int(b), float(rel[a, b])


def validate(
    pencil: HermitianPencil,
    lam: complex,
    eps: float,
    method: Method,
    residual: float | None = None,
) -> CriticalValue:
    """Re-diagonalize ``H(lam)`` and record the closest eigenvalue pair."""
    energies = eig_general(pencil.at(lam)).values
    a, b, gap = closest_pair(energies)
    paired = 0.5 * (energies[a] + energies[b]) if len(energies) > 1 else energies[0]
    return CriticalValue(complex(lam), float(eps), gap, complex(paired), Method(method), residual=residual)


def classify_spurious(
    pencil: HermitianPencil,
    cv: CriticalValue,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
    v_rank: int | None = None,
) -> CriticalValue:
    """Assign a status to a validated candidate.

    Order of the gates: huge ``|lam|`` with rank-deficient ``V``; real ``lam``
    (a zero eigenvalue of ``H(Re lam)`` marks the ``E = 0`` self-pairing);
    then the relative-gap check. A complex candidate that fails the gap check
    but has a near-zero eigenvalue is the complex ``E = 0`` self-pairing and is
    also marked ``spurious_zero_eigenvalue``; anything else failing the gap
    check stays ``candidate``.
    """
    lam = cv.lam
    mag = abs(lam)
    if v_rank is None:
        v_rank = pencil.v_rank()
    if mag > lambda_cap and v_rank < pencil.n:
        return replace(cv, status=Status.SPURIOUS_RANK)
    if abs(lam.imag) <= tol_real * mag:
        energies = np.linalg.eigvalsh(pencil.at(lam.real))
        if _has_zero_eigenvalue(energies, cv.eps):
            return replace(cv, status=Status.SPURIOUS_ZERO_EIGENVALUE)
        return replace(cv, status=Status.SPURIOUS_REAL)
    if cv.rel_gap <= 10.0 * cv.eps:
        return replace(cv, status=Status.ACCEPTED)
    energies = eig_general(pencil.at(lam)).values
    if _has_zero_eigenvalue(energies, cv.eps):
        return replace(cv, status=Status.SPURIOUS_ZERO_EIGENVALUE)
    return replace(cv, status=Status.CANDIDATE)


def _has_zero_eigenvalue(energies: np.ndarray, eps: float) -> bool:
    scale = float(np.max(np.abs(energies))) if len(energies) else 0.0
    return bool(np.min(np.abs(energies)) <= 10.0 * eps * scale)


def deduplicate(cvs: list[CriticalValue], rtol: float = DEDUP_RTOL) -> list[CriticalValue]:
    """Merge candidates closer than ``rtol * max(1, |lam|)``, keeping the smaller gap."""
    out: list[CriticalValue] = []
    for cv in sorted(cvs, key=lambda c: (c.rel_gap, abs(c.lam))):
        if any(abs(cv.lam - o.lam) <= rtol * max(1.0, abs(o.lam)) for o in out):
            continue
        out.append(cv)
    return sort_candidates(out)


def sort_candidates(cvs: list[CriticalValue]) -> list[CriticalValue]:
    # |lam| first; conjugate partners ordered with Im > 0 first.
    return sorted(cvs, key=lambda c: (round(abs(c.lam), 12), -c.lam.imag, c.lam.real))


def _finalize(
    pencil: HermitianPencil,
    lams,
    eps: float,
    method: Method,
    residuals=None,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
) -> list[CriticalValue]:
    rank = pencil.v_rank()
    out = []
    for i, lam in enumerate(lams):
        res = None if residuals is None else float(residuals[i])
        cv = validate(pencil, lam, eps, method, residual=res)
        out.append(classify_spurious(pencil, cv, tol_real, lambda_cap, v_rank=rank))
    return deduplicate(out)


def find_critical_dense(
    pencil: HermitianPencil,
    eps: float = DEFAULT_EPS,
    *,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
    cap: int = DENSE_CAP,
) -> list[CriticalValue]:
    """All finite eigenvalues of ``(Delta1, Delta0)``, validated and classified. O(N^6)."""
    d0, d1 = delta_matrices(pencil, eps, cap=cap)
    try:
        (alpha, beta) = sla.eig(d1, d0, right=False, homogeneous_eigvals=True)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QZ failed: {exc}") from exc
    finite = np.abs(beta) > np.finfo(float).tiny * np.maximum(np.abs(alpha), 1.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lams = alpha[finite] / beta[finite]
    lams = lams[np.isfinite(lams) & (np.abs(lams) < 1e300)]
    return _finalize(pencil, lams, eps, Method.DENSE, tol_real=tol_real, lambda_cap=lambda_cap)


@dataclass
class ArnoldiSearch:
    """Arnoldi state together with the operator settings it belongs to."""

    state: ArnoldiState
    eps: float
    shift: complex
    seed: int
    m: int


def _operator_with_fallback(pencil: HermitianPencil, eps: float, shift: complex | None):
    if shift is not None:
        return DeltaOperator(pencil, eps, shift)
    try:
        return DeltaOperator(pencil, eps, 0.0)
    except SpectraOverlap:
        pass
    # Delta1 is singular (H0 has a zero eigenvalue or an exact (1+eps) ratio), so
    # lam = 0 is itself a pencil eigenvalue. Shift away from it by a tenth of the
    # natural lam scale; a shift much closer makes the operator violently
    # non-normal. Real shifts keep the conjugate symmetry of |lam - s|.
    h = np.linalg.norm(pencil.h0, 2)
    v = np.linalg.norm(pencil.v, 2)
    base = 0.1 * (h / v if v > 0 else 1.0)
    last: SpectraOverlap | None = None
    for k in (1, -1, 2, -2, 3, -3):
        try:
            return DeltaOperator(pencil, eps, k * base)
        except SpectraOverlap as exc:
            last = exc
    assert last is not None
    raise last


def find_critical_arnoldi(
    pencil: HermitianPencil,
    eps: float = DEFAULT_EPS,
    m: int = 10,
    state: ArnoldiSearch | None = None,
    *,
    tol_ritz: float = TOL_RITZ,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
    max_dim: int | None = None,
    max_matvecs: int | None = None,
    seed: int | None = None,
    shift: complex | None = None,
    polish: bool = True,
) -> tuple[list[CriticalValue], ArnoldiSearch]:
    """The ``m`` (or more) smallest-``|lam|`` candidates via Arnoldi on ``Delta1^{-1} Delta0``.

    The operator is strongly non-normal (the ``eps``-scaled divisors on the
    ``i = j`` directions), so Ritz values with small residuals can still be off
    by ``cond * residual``; with ``polish`` each converged Ritz value is
    refined by a few inverse-iteration steps seeded at it.
    Pass the returned search object back in with a larger ``m`` to resume.
    """
    if m < 1:
        raise InputError("m must be at least 1")
    if state is not None:
        if state.eps != eps:
            raise InputError("cannot resume an Arnoldi search with a different eps")
        shift = state.shift
        seed = state.seed
        arn_state = state.state
    else:
        arn_state = None
        seed = default_seed() if seed is None else seed
    op = _operator_with_fallback(pencil, eps, shift)
    try:
        thetas, rel, arn_state = largest_magnitude(
            op.apply,
            op.size,
            m,
            arn_state,
            tol=tol_ritz,
            max_dim=max_dim,
            max_matvecs=max_matvecs,
            seed=seed,
        )
    except Stagnation as exc:
        exc.state = ArnoldiSearch(exc.state, eps, op.shift, seed, m)
        raise
    search = ArnoldiSearch(arn_state, eps, op.shift, seed, m)
    keep = np.abs(thetas) > 1e-14 * max(np.max(np.abs(thetas), initial=0.0), 1e-300)
    lams = op.shift + 1.0 / thetas[keep]
    if polish:
        lams = np.array([_polish(pencil, eps, lam, seed) for lam in lams])
    cvs = _finalize(
        pencil, lams, eps, Method.ARNOLDI, rel[keep], tol_real=tol_real, lambda_cap=lambda_cap
    )
    return cvs, search


def _polish(pencil: HermitianPencil, eps: float, lam: complex, seed: int) -> complex:
    if lam == 0 or not np.isfinite(lam):
        return lam
    try:
        return refine_inverse_iteration(
            pencil, eps, lam, max_iter=30, seed=seed, divergence=1e-3, classify=False
        ).lam
    except (NoConvergence, DivergedFromGuess, SpectraOverlap):
        return lam


def refine_inverse_iteration(
    pencil: HermitianPencil,
    eps: float,
    guess: complex,
    max_iter: int = 200,
    *,
    tol: float = 1e-10,
    seed: int | None = None,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
    divergence: float = 0.5,
    classify: bool = True,
) -> CriticalValue:
    """Converge one critical value near ``guess`` by shift-and-invert power iteration.

    Iterates ``x <- (Delta1 - s Delta0)^{-1} Delta0 x`` with ``s = guess``;
    the dominant eigenvalue is ``1 / (lam - s)`` for the critical value closest
    to the shift. Only structured (Sylvester) solves are used.
    """
    guess = complex(guess)
    if not np.isfinite(guess) or guess == 0:
        raise InputError("guess must be finite and nonzero")
    try:
        op = DeltaOperator(pencil, eps, shift=guess)
    except SpectraOverlap:
        # The guess sits on a critical value to working precision; nudge it.
        op = DeltaOperator(pencil, eps, shift=guess * (1.0 + 1e-9 + 1e-9j))
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    x = rng.standard_normal(op.size) + 1j * rng.standard_normal(op.size)
    x /= np.linalg.norm(x)
    lam_old = None
    lam = guess
    for it in range(1, max_iter + 1):
        y = op.apply(x)
        nu = np.vdot(x, y)
        ny = np.linalg.norm(y)
        if nu == 0 or ny == 0:
            raise NoConvergence("inverse iteration collapsed to zero", it)
        lam = op.shift + 1.0 / nu
        x = y / ny
        if lam_old is not None and abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
    else:
        raise NoConvergence(
            f"inverse iteration did not converge in {max_iter} steps (last lam = {lam})", max_iter
        )
    if abs(lam - guess) > divergence * abs(guess):
        raise DivergedFromGuess(
            f"converged to {lam:.6g}, more than {divergence:.0%} away from guess {guess:.6g}",
            guess,
            lam,
        )
    residual = float(np.linalg.norm(op.apply(x) - nu * x) / abs(nu))
    cv = validate(pencil, lam, eps, Method.INVERSE_ITERATION, residual=residual)
    cv = replace(cv, iterations=it)
    if not classify:
        return cv
    return classify_spurious(pencil, cv, tol_real, lambda_cap)


def extrapolate_eps(pencil: HermitianPencil, cv: CriticalValue, **kwargs) -> CriticalValue:
    """Richardson step on the ``O(eps^2)`` error: ``(4 lam(eps/2) - lam(eps)) / 3``."""
    half = refine_inverse_iteration(pencil, cv.eps / 2.0, cv.lam, **kwargs)
    lam_star = (4.0 * half.lam - cv.lam) / 3.0
    out = validate(pencil, lam_star, cv.eps, cv.method, residual=cv.residual)
    return replace(
        out,
        status=cv.status,
        lambda_eps=cv.lam,
        lambda_half=half.lam,
        iterations=half.iterations,
    )


def accepted_upper(cvs: list[CriticalValue]) -> list[CriticalValue]:
    """Accepted candidates with ``Im lam > 0``, in increasing ``|lam|``."""
    return sort_candidates([c for c in cvs if c.accepted and c.lam.imag > 0])
