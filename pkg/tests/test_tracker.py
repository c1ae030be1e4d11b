import numpy as np
import pytest

from pertcrit.critsolve import accepted_upper, find_critical_dense
from pertcrit.errors import AmbiguousMatch, Exhausted, InputError, InsufficientData, NeedMoreCandidates
from pertcrit.models import build_helium_mp, build_ho_delta
from pertcrit.pencil import HermitianPencil
from pertcrit.tracker import (
    LimitKind,
    classify_limit,
    compute_roc,
    continue_branches,
    sweep_branches,
)
from conftest import random_pencil, two_level


def test_two_level_track():
    cv = accepted_upper(find_critical_dense(two_level(), 1e-4))[0]
    tr = continue_branches(two_level(), cv)
    assert sorted(tr.pair_indices) == [0, 1]
    assert tr.endpoint_levels == (0, 1)
    assert tr.thetas[0] == 0.0 and tr.thetas[-1] == 1.0
    assert np.all(np.diff(tr.thetas) > 0)


@pytest.mark.parametrize("phys, converges", [(0.4, True), (0.6, False)])
def test_two_level_roc(phys, converges):
    r = compute_roc(two_level(), lambda_phys=phys)
    assert r.radius == pytest.approx(0.5, abs=1e-7)
    assert r.converges_at_phys is converges
    assert r.dominant.involves_ground


def test_track_spectra_match_direct_diagonalization():
    p = random_pencil(7, 6)
    cv = accepted_upper(find_critical_dense(p, 1e-4))[0]
    tr = continue_branches(p, cv)
    for j, t in enumerate(tr.thetas):
        direct = np.linalg.eigvals(p.at((1 - t) * cv.lam))
        got = tr.tracks[:, j]
        # Bijection: every direct eigenvalue is hit exactly once.
        d = np.abs(got[:, None] - direct[None, :])
        assert len(set(np.argmin(d, axis=1))) == p.n
        assert np.max(np.min(d, axis=1)) <= 1e-9 * max(1.0, np.max(np.abs(direct)))
    end = np.sort(tr.tracks[:, -1].real)
    assert np.allclose(end, np.linalg.eigvalsh(p.h0), atol=1e-9 * np.linalg.norm(p.h0, 2))


def test_ho_dominant_involves_ground_and_is_refinement_stable():
    p = build_ho_delta(20)
    r = compute_roc(p)
    assert r.dominant.labels[0] == "phi0"
    tr41 = continue_branches(p, r.dominant.critical, 41)
    assert tr41.endpoint_labels == r.dominant.labels


def test_roc_examines_in_increasing_modulus():
    p = random_pencil(12, 6)
    r = compute_roc(p, method="dense")
    mags = [abs(bp.lam) for bp in r.candidates]
    assert mags == sorted(mags)
    assert r.candidates[-1] is r.dominant
    assert not any(bp.involves_ground for bp in r.candidates[:-1])
    assert r.radius == abs(r.dominant.lam)


def test_roc_arnoldi_agrees_with_dense():
    p = random_pencil(13, 7)
    a = compute_roc(p, method="arnoldi", m_init=2)
    d = compute_roc(p, method="dense")
    assert a.radius == pytest.approx(d.radius, rel=1e-7)


def test_decoupled_ground_exhausts():
    # The ground level does not couple to anything: it never branches.
    v = np.zeros((3, 3))
    v[1, 2] = v[2, 1] = 1.0
    p = HermitianPencil(np.diag([0.5, 1.0, 2.0]), v)
    with pytest.raises(Exhausted):
        compute_roc(p, method="dense")


def test_need_more_candidates_carries_state(scf):
    p = build_helium_mp(scf, 12)
    with pytest.raises(NeedMoreCandidates) as info:
        compute_roc(p, method="arnoldi", m_init=2, max_m=4)
    assert info.value.state is not None
    assert all(not bp.involves_ground for bp in info.value.examined)


def test_coarse_sampling_is_ambiguous(scf):
    p = build_helium_mp(scf, 12)
    lam = -0.8978956312959719 + 0.29537729778678046j
    with pytest.raises(AmbiguousMatch):
        continue_branches(p, lam, 21, max_refine=0)
    tr = continue_branches(p, lam, 81, max_refine=8)
    assert tr.endpoint_labels == ("(0,6)", "(2,6)")


def test_samples_lower_bound():
    with pytest.raises(InputError):
        continue_branches(two_level(), 0.5j, 4)


def test_limit_constant_family():
    lc = classify_limit([(m, 1.0 + 2.0j) for m in (4, 6, 8, 10)])
    assert lc.kind is LimitKind.ALPHA
    assert lc.slope == pytest.approx(0.0, abs=1e-12)


def test_limit_linear_growth_diverges():
    lc = classify_limit([(m, (0.3 * m + 1) * np.exp(1j)) for m in (4, 6, 8, 10)])
    assert lc.kind is LimitKind.DIVERGING
    assert lc.slope == pytest.approx(0.3, rel=1e-9)


def test_limit_exponential_convergence():
    fam = [(m, 1.13 * np.exp(2.9j) + 0.5 * np.exp(-0.4 * m)) for m in (6, 8, 10, 12, 14)]
    lc = classify_limit(fam)
    assert lc.kind is LimitKind.ALPHA
    # Errors are measured against the largest M, which biases the fit upwards.
    assert 0.3 < lc.beta < 0.7


def test_limit_real():
    fam = [(m, -1.0 + 1j * 0.5 ** m) for m in (2, 4, 6, 8)]
    assert classify_limit(fam).kind is LimitKind.REAL_LIMIT


def test_limit_needs_three():
    with pytest.raises(InsufficientData):
        classify_limit([(1, 1j), (2, 1j)])


def test_sweep_constant_without_perturbation():
    p = HermitianPencil(np.diag([1.0, 2.0, 4.0]), np.zeros((3, 3)))
    e = sweep_branches(p, np.linspace(-1, 1, 11))
    assert np.allclose(e, [[1.0, 2.0, 4.0]] * 11)


def test_sweep_follows_exact_crossings():
    # Decoupled levels cross at lam = 1; branches keep their identity.
    p = HermitianPencil(np.diag([0.0, 1.0]), np.diag([1.0, 0.0]))
    e = sweep_branches(p, np.linspace(0, 2, 21))
    assert np.allclose(e[:, 0], np.linspace(0, 2, 21))
    assert np.allclose(e[:, 1], 1.0)


def test_ho_sweep_ground_crosses_zero():
    p = build_ho_delta(100)
    lams = np.linspace(-1, 3, 401)
    e0 = sweep_branches(p, lams, 1)[:, 0]
    k = np.nonzero(np.diff(np.sign(e0)))[0]
    assert len(k) == 1
    cross = lams[k[0]] - e0[k[0]] * (lams[k[0] + 1] - lams[k[0]]) / (e0[k[0] + 1] - e0[k[0]])
    assert abs(cross + 0.6758) < 0.02
