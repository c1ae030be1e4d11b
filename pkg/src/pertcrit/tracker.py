"""Eigenvalue continuation from critical values to the origin, and the ROC search.

Along the segment ``p(theta) = (1 - theta) lam`` the full spectrum of
``H(p(theta))`` is computed on a theta grid and consecutive spectra are
matched by optimal assignment. The two branches that coincide at ``theta = 0``
end, at ``theta = 1``, on two unperturbed levels; if one of them is the ground
level, ``lam`` is a singularity of the ground-state series. The first such
point in order of increasing ``|lam|`` is the dominant one and its modulus is
the radius of convergence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from pertcrit.critsolve import (
    ArnoldiSearch,
    CriticalValue,
    TOL_REAL,
    LAMBDA_CAP,
    accepted_upper,
    closest_pair,
    find_critical_arnoldi,
    find_critical_dense,
    refine_inverse_iteration,
)
from pertcrit.errors import (
    AmbiguousMatch,
    DivergedFromGuess,
    Exhausted,
    InputError,
    InsufficientData,
    NeedMoreCandidates,
    NoConvergence,
    SpectrumFailure,
    Stagnation,
)
from pertcrit.linalg import eig_general
from pertcrit.pencil import DEFAULT_EPS, DENSE_CAP, HermitianPencil

DEFAULT_SAMPLES = 21
THETA0 = 1e-3
JUMP_FACTOR = 5.0
MAX_REFINE = 3
# Assigned target must be this much closer than the runner-up.
MATCH_MARGIN = 2.0
# A tracked branch may move at most this fraction of the distance to its nearest neighbour.
STEP_SEPARATION = 0.5
DENSE_AUTO_MAX_N = 10
# compute_roc re-tracks an ambiguous candidate this many times, each time doubling the
# samples and allowing three more bisection levels.
SAMPLE_DOUBLINGS = 4
# Neighbourhood sizes for the seeded search.
LOCAL_MIN = 8
LOCAL_MAX = 64


@dataclass
class BranchTrack:
    lambda_star: complex
    thetas: NDArray[np.floating]
    tracks: NDArray[np.complexfloating]  # (N, len(thetas))
    pair_indices: tuple[int, int]
    endpoint_levels: tuple[int, int]
    endpoint_labels: tuple[str, str]
    refinements: int = 0

    @property
    def path(self) -> NDArray[np.complexfloating]:
        return (1.0 - self.thetas) * self.lambda_star

    def pair_tracks(self) -> NDArray[np.complexfloating]:
        return self.tracks[list(self.pair_indices)]


@dataclass
class BranchPoint:
    critical: CriticalValue
    energy: complex
    branches: tuple[int, int]
    labels: tuple[str, str]
    involves_ground: bool
    track: BranchTrack | None = field(default=None, repr=False)

    @property
    def lam(self) -> complex:
        return self.critical.lam


@dataclass
class RocReport:
    candidates: list[BranchPoint]
    dominant: BranchPoint
    radius: float
    lambda_phys: float
    converges_at_phys: bool
    eps: float
    method: str
    critical_values: list[CriticalValue] = field(default_factory=list, repr=False)

    @property
    def candidates_examined(self) -> int:
        return len(self.candidates)


def _spectrum(pencil: HermitianPencil, lam: complex) -> NDArray:
    try:
        return eig_general(pencil.at(lam)).values
    except NoConvergence as exc:
        raise SpectrumFailure(f"eigensolver failed at lam = {lam}: {exc}") from exc


def _match(prev: NDArray, pred: NDArray, new: NDArray) -> NDArray:
    """Permutation ``perm`` such that ``new[perm[i]]`` continues track ``i``."""
    cost = np.abs(pred[:, None] - new[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(prev), dtype=int)
    perm[rows] = cols
    return perm


def _step_ok(
    pred: NDArray,
    prev: NDArray,
    new: NDArray,
    perm: NDArray,
    watch: tuple[int, int],
    scale: float,
    speed: NDArray | None,
    dt: float,
) -> bool:
    moves = np.abs(new[perm] - prev)
    floor = 1e-10 * scale
    cap = JUMP_FACTOR * max(float(np.median(moves)), floor)
    for i, partner in (watch, watch[::-1]):
        target = perm[i]
        d = abs(new[target] - pred[i])
        others = np.abs(new - pred[i])
        # Swapping the two coalescing branches does not change their endpoint set.
        others[[target, perm[partner]]] = np.inf
        # Ignore competitors degenerate with the target (e.g. degenerate H0 levels).
        others[np.abs(new - new[target]) <= 1e-9 * scale] = np.inf
        runner_up = float(np.min(others)) if len(others) > 2 else np.inf
        if d > floor and d * MATCH_MARGIN > runner_up:
            return False
        own = JUMP_FACTOR * speed[i] * dt if speed is not None else 0.0
        if moves[i] > max(cap, own) and moves[i] > 1e-6 * scale:
            return False
        # Step size control: a branch may not move farther than the distance to its
        # nearest neighbour, or a near-crossing between samples goes unresolved.
        sep = np.inf
        for spec, k in ((prev, i), (new, target)):
            gaps = np.abs(spec - spec[k])
            gaps[k] = np.inf
            gaps[perm[partner] if spec is new else partner] = np.inf
            gaps[gaps <= 1e-9 * scale] = np.inf
            sep = min(sep, float(np.min(gaps)))
        if moves[i] > STEP_SEPARATION * sep and moves[i] > 1e-6 * scale:
            return False
    return True


def continue_branches(
    pencil: HermitianPencil,
    cv: CriticalValue | complex,
    samples: int = DEFAULT_SAMPLES,
    *,
    theta0: float = THETA0,
    max_refine: int = MAX_REFINE,
) -> BranchTrack:
    """Follow all eigenvalues of ``H((1 - theta) lam)`` from ``theta = 0`` to ``1``.

    Steps where a tracked branch's assignment is ambiguous, where it moves
    more than ``JUMP_FACTOR`` times the median movement, or more than
    ``STEP_SEPARATION`` times the distance to its nearest neighbour, are
    bisected up to ``max_refine`` times before ``AmbiguousMatch`` is raised.
    """
    if samples < 5:
        raise InputError("at least 5 samples are required")
    lam = complex(cv.lam if isinstance(cv, CriticalValue) else cv)
    n = pencil.n
    levels, level_labels = pencil.unperturbed_levels()
    scale = max(float(np.max(np.abs(levels))), 1.0)

    e0 = _spectrum(pencil, lam)
    a, b, _ = closest_pair(e0)
    pair = (a, b)

    base = np.linspace(0.0, 1.0, samples)
    grid = [0.0] + ([theta0] if theta0 < base[1] else []) + list(base[1:])

    thetas = [0.0]
    spectra = [e0]
    refinements = 0
    pending = grid[1:][::-1]
    depth = {t: 0 for t in pending}

    def predict(t: float) -> NDArray:
        if len(spectra) >= 3:
            dt_old = thetas[-1] - thetas[-2]
            return spectra[-1] + (spectra[-1] - spectra[-2]) * ((t - thetas[-1]) / dt_old)
        return spectra[-1]

    while pending:
        t = pending[-1]
        prev = spectra[-1]
        new = _spectrum(pencil, (1.0 - t) * lam)
        speed = None
        if len(spectra) >= 2:
            speed = np.abs(prev - spectra[-2]) / (thetas[-1] - thetas[-2])
        pred = predict(t)
        perm = _match(prev, pred, new)
        first_step = len(thetas) == 1
        ok = first_step or _step_ok(pred, prev, new, perm, pair, scale, speed, t - thetas[-1])
        if not ok:
            d = depth.get(t, 0)
            if d < max_refine:
                mid = 0.5 * (thetas[-1] + t)
                depth[mid] = d + 1
                depth[t] = d + 1
                pending.append(mid)
                refinements += 1
                continue
            raise AmbiguousMatch(
                f"ambiguous branch matching near theta = {t:.4g} for lam = {lam:.6g}; "
                "increase samples",
                t,
            )
        pending.pop()
        thetas.append(t)
        spectra.append(new[perm])

    tracks = np.array(spectra).T
    end = tracks[:, -1]
    end_levels = []
    for i in pair:
        k = int(np.argmin(np.abs(levels - end[i])))
        end_levels.append(k)
    if end_levels[0] == end_levels[1]:
        # Two tracks on one numerical level: it must be degenerate; take the next one.
        order = np.argsort(np.abs(levels - end[pair[1]]))
        end_levels[1] = int(order[1])
    end_levels_t = tuple(sorted(end_levels))
    return BranchTrack(
        lambda_star=lam,
        thetas=np.array(thetas),
        tracks=tracks,
        pair_indices=pair,
        endpoint_levels=end_levels_t,
        endpoint_labels=(level_labels[end_levels_t[0]], level_labels[end_levels_t[1]]),
        refinements=refinements,
    )


def _track_with_retries(pencil, cv, samples: int, max_refine: int, doublings: int) -> BranchTrack:
    for k in range(doublings + 1):
        try:
            return continue_branches(pencil, cv, samples * 2**k, max_refine=max_refine + 3 * k)
        except AmbiguousMatch:
            if k == doublings:
                raise
    raise AssertionError("unreachable")


def branch_point(pencil: HermitianPencil, cv: CriticalValue, track: BranchTrack) -> BranchPoint:
    levels, _ = pencil.unperturbed_levels()
    ground = float(levels[0])
    tol = 1e-9 * max(1.0, float(np.max(np.abs(levels))))
    involves = any(abs(levels[k] - ground) <= tol for k in track.endpoint_levels)
    pt = track.pair_tracks()[:, 0]
    return BranchPoint(
        critical=cv,
        energy=complex(np.mean(pt)),
        branches=track.endpoint_levels,
        labels=track.endpoint_labels,
        involves_ground=involves,
        track=track,
    )


def compute_roc(
    pencil: HermitianPencil,
    eps: float = DEFAULT_EPS,
    m_init: int = 8,
    lambda_phys: float | None = None,
    *,
    method: str = "auto",
    samples: int = DEFAULT_SAMPLES,
    max_m: int | None = None,
    critical_values: list[CriticalValue] | None = None,
    search: ArnoldiSearch | None = None,
    tol_real: float = TOL_REAL,
    lambda_cap: float = LAMBDA_CAP,
    seed: int | None = None,
    max_refine: int = MAX_REFINE,
    sample_doublings: int = SAMPLE_DOUBLINGS,
    guesses: list[complex] | None = None,
    dense_cap: int = DENSE_CAP,
) -> RocReport:
    """Dominant branch point of the ground state and the radius of convergence.

    Accepted critical values with ``Im lam > 0`` are examined in increasing
    ``|lam|``; each is continued to the origin and the search stops at the
    first whose branches reach the ground level. With the Arnoldi method the
    candidate list is extended by resuming the iteration with doubled ``m``.

    ``guesses`` (method ``inverse_iteration``) skips the global search: each
    guess, typically the dominant point of a coarser discretization, is
    refined by inverse iteration; if that lands on a critical value that does
    not reach the ground level, the neighbourhood of the guess is searched by
    shift-and-invert Arnoldi. Only these values are examined.
    Dominance is then inherited from the coarse level rather than checked.
    """
    if m_init < 1:
        raise InputError("m_init must be at least 1")
    if lambda_phys is None:
        lambda_phys = pencil.lambda_phys
    n2 = pencil.n * pencil.n
    if guesses is not None and method == "auto":
        method = "inverse_iteration"
    if method == "auto":
        method = "dense" if pencil.n <= DENSE_AUTO_MAX_N else "arnoldi"
    if max_m is None:
        max_m = n2

    examined: list[BranchPoint] = []
    seen: list[complex] = []
    m = m_init
    all_cvs: list[CriticalValue] = []

    def examine(cvs: list[CriticalValue]) -> BranchPoint | None:
        for cv in accepted_upper(cvs):
            if any(abs(cv.lam - s) <= 1e-8 * max(1.0, abs(s)) for s in seen):
                continue
            seen.append(cv.lam)
            track = _track_with_retries(pencil, cv, samples, max_refine, sample_doublings)
            bp = branch_point(pencil, cv, track)
            examined.append(bp)
            if bp.involves_ground:
                return bp
        return None

    def report(dominant: BranchPoint) -> RocReport:
        radius = abs(dominant.lam)
        return RocReport(
            candidates=sorted(examined, key=lambda bp: abs(bp.lam)),
            dominant=dominant,
            radius=radius,
            lambda_phys=float(lambda_phys),
            converges_at_phys=radius > lambda_phys,
            eps=eps,
            method=method,
            critical_values=all_cvs,
        )

    if critical_values is not None:
        all_cvs = list(critical_values)
        dom = examine(all_cvs)
        if dom is None:
            raise Exhausted("no supplied critical value branches from the ground level")
        return report(dom)

    if method == "inverse_iteration":
        if not guesses:
            raise InputError("the inverse_iteration method needs at least one guess")
        for g in guesses:
            g = complex(g)
            # Only the upper half-plane is examined; conjugates are equivalent.
            g = g.conjugate() if g.imag < 0 else g
            try:
                cv = refine_inverse_iteration(
                    pencil, eps, g, seed=seed, tol_real=tol_real, lambda_cap=lambda_cap
                )
                all_cvs.append(cv)
                dom = examine([cv])
                if dom is not None:
                    return report(dom)
            except (NoConvergence, DivergedFromGuess):
                pass
            # The nearest critical value is an intruder: search the neighbourhood
            # of the guess with shift-and-invert Arnoldi.
            m_loc = max(m_init, LOCAL_MIN)
            while m_loc <= LOCAL_MAX:
                try:
                    cvs, _ = find_critical_arnoldi(
                        pencil, eps, m_loc, shift=g, seed=seed,
                        tol_real=tol_real, lambda_cap=lambda_cap,
                    )
                except Stagnation:
                    break
                all_cvs.extend(cvs)
                dom = examine(cvs)
                if dom is not None:
                    return report(dom)
                m_loc *= 2
        raise NeedMoreCandidates(
            "no critical value near the guesses branches from the ground level",
            state=None,
            examined=examined,
        )

    if method == "dense":
        all_cvs = find_critical_dense(
            pencil, eps, tol_real=tol_real, lambda_cap=lambda_cap, cap=dense_cap
        )
        dom = examine(all_cvs)
        if dom is None:
            raise Exhausted("no critical value among all N^2 branches from the ground level")
        return report(dom)
    if method != "arnoldi":
        raise InputError(f"unknown method {method!r}")

    while True:
        try:
            cvs, search = find_critical_arnoldi(
                pencil, eps, m, search, tol_real=tol_real, lambda_cap=lambda_cap, seed=seed
            )
        except Stagnation as exc:
            raise NeedMoreCandidates(
                f"Arnoldi stagnated at m = {m}", state=exc.state, examined=examined
            ) from exc
        all_cvs = cvs
        dom = examine(cvs)
        if dom is not None:
            return report(dom)
        if m >= min(max_m, n2):
            if m >= n2:
                raise Exhausted("no critical value branches from the ground level")
            raise NeedMoreCandidates(
                f"no ground-state branch point among the {m} smallest critical values",
                state=search,
                examined=examined,
            )
        m = min(2 * m, max_m, n2)


def sweep_branches(pencil: HermitianPencil, lams, k: int | None = None) -> NDArray[np.floating]:
    """Eigenvalue branches of ``H(lam)`` along a real grid, matched step to step.

    Column ``j`` follows the branch that is the ``j``-th lowest at ``lams[0]``;
    branches are continued through exact crossings instead of being re-sorted.
    Returns an array of shape ``(len(lams), k)``.
    """
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 1 or len(lams) < 2 or not np.all(np.isfinite(lams)):
        raise InputError("sweep needs at least two finite lambda values")
    n = pencil.n
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise InputError(f"branch count must lie in [1, {n}]")
    rows = [np.linalg.eigvalsh(pencil.at(float(lams[0])))]
    for j in range(1, len(lams)):
        new = np.linalg.eigvalsh(pencil.at(float(lams[j])))
        prev = rows[-1]
        if j >= 2:
            pred = prev + (prev - rows[-2]) * ((lams[j] - lams[j - 1]) / (lams[j - 1] - lams[j - 2]))
        else:
            pred = prev
        perm = _match(prev, pred, new)
        rows.append(new[perm])
    return np.array(rows)[:, :k]


class LimitKind(str, enum.Enum):
    ALPHA = "alpha"
    DIVERGING = "diverging"
    REAL_LIMIT = "real_limit"


@dataclass
class LimitClassification:
    kind: LimitKind
    sizes: list[float]
    values: list[complex]
    limit: complex | None
    slope: float | None
    intercept: float | None
    beta: float | None
    details: dict


def classify_limit(family, real_tol: float = 0.05) -> LimitClassification:
    """Classify how a branch point behaves as the discretization is refined.

    ``family`` is a sequence of ``(M, lam)`` pairs where ``lam`` may be a
    complex number, a :class:`BranchPoint` or a :class:`RocReport`.

    * ``real_limit``: ``|Im lam| / |lam|`` shrinks monotonically, at least halves
      over the family and ends below ``real_tol``. A small but stagnant
      imaginary part is not enough.
    * ``diverging``: ``|lam|`` grows monotonically without its increments
      shrinking geometrically; a linear fit ``|lam| ~ a M + c`` is reported.
    * ``alpha``: otherwise; successive differences are fitted as
      ``|R(M) - R(M_max)| ~ exp(-beta M)``.
    """
    pts = []
    for size, item in family:
        if isinstance(item, RocReport):
            item = item.dominant
        if isinstance(item, BranchPoint):
            item = item.lam
        pts.append((float(size), complex(item)))
    if len(pts) < 3:
        raise InsufficientData("at least three family members are needed")
    pts.sort(key=lambda p: p[0])
    sizes = np.array([p[0] for p in pts])
    lams = np.array([p[1] for p in pts])
    if np.any(np.diff(sizes) <= 0):
        raise InsufficientData("discretization parameters must be distinct")
    mags = np.abs(lams)
    im_ratio = np.abs(lams.imag) / np.maximum(mags, 1e-300)
    diffs = np.abs(np.diff(lams))
    slope, intercept = np.polyfit(sizes, mags, 1)
    details: dict = {"im_ratio": im_ratio.tolist(), "successive_diffs": diffs.tolist()}

    collapsing = im_ratio[-1] <= 0.5 * im_ratio[0]
    if im_ratio[-1] < real_tol and collapsing and np.all(np.diff(im_ratio) <= 0):
        return LimitClassification(
            LimitKind.REAL_LIMIT, sizes.tolist(), lams.tolist(), complex(lams[-1].real),
            float(slope), float(intercept), None, details,
        )

    growing = bool(np.all(np.diff(mags) > 0))
    incr = np.diff(mags)
    shrinking = len(incr) >= 2 and incr[-1] < 0.5 * incr[0]
    if growing and not shrinking and slope > 0:
        return LimitClassification(
            LimitKind.DIVERGING, sizes.tolist(), lams.tolist(), None,
            float(slope), float(intercept), None, details,
        )

    err = np.abs(mags[:-1] - mags[-1])
    beta = None
    ok = err > 1e-14 * max(1.0, mags[-1])
    if np.count_nonzero(ok) >= 2:
        fit = np.polyfit(sizes[:-1][ok], np.log(err[ok]), 1)
        beta = float(-fit[0])
        details["log_error_fit"] = [float(fit[0]), float(fit[1])]
    elif not np.any(ok):
        beta = 0.0
        slope = 0.0
    return LimitClassification(
        LimitKind.ALPHA, sizes.tolist(), lams.tolist(), complex(lams[-1]),
        float(slope), float(intercept), beta, details,
    )
