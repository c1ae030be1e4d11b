import csv
import json

import numpy as np
import pytest

from pertcrit import io
from pertcrit.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, EXIT_RESUMABLE, main
from pertcrit.critsolve import accepted_upper, find_critical_arnoldi
from pertcrit.errors import InputError
from pertcrit.models import build_helium_mp
from pertcrit.pencil import HermitianPencil
from conftest import random_pencil, two_level


def read(path):
    return json.loads(path.read_text())


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def two_level_file(tmp_path):
    path = tmp_path / "p2.json"
    io.save_pencil(two_level(), path)
    return path


# --- file formats ---------------------------------------------------------------


def test_pencil_round_trip_is_exact(tmp_path):
    p = random_pencil(3, 6)
    p = HermitianPencil(p.h0, p.v, labels=[f"s{k}" for k in range(6)], meta={"model": "random"})
    path = tmp_path / "p.json"
    io.save_pencil(p, path)
    q = io.load_pencil(path)
    assert np.array_equal(p.h0, q.h0) and np.array_equal(p.v, q.v)
    assert q.labels == p.labels and q.meta == p.meta
    io.save_pencil(q, tmp_path / "q.json")
    assert path.read_bytes() == (tmp_path / "q.json").read_bytes()


def test_pencil_doc_shape(tmp_path):
    path = tmp_path / "p.json"
    io.save_pencil(two_level(), path)
    doc = read(path)
    assert doc["n"] == 2
    assert len(doc["h0"]) == 4 and doc["h0"][3] == [1.0, 0.0]
    assert doc["v"][1] == [1.0, 0.0]
    io.validate(doc, "pencil")


def test_malformed_pencil_rejected(tmp_path):
    bad = {"n": 2, "h0": [[0, 0]] * 3, "v": [[0, 0]] * 4, "labels": [], "meta": {}}
    with pytest.raises(InputError):
        io.pencil_from_doc(bad)
    nonherm = {"n": 2, "h0": [[0, 0], [1, 0], [0, 0], [0, 0]], "v": [[0, 0]] * 4, "labels": [], "meta": {}}
    with pytest.raises(InputError):
        io.pencil_from_doc(nonherm)


def test_resume_token_round_trip(tmp_path):
    p = random_pencil(5, 6)
    _, search = find_critical_arnoldi(p, 1e-4, 2, seed=1)
    path = tmp_path / "t.npz"
    io.save_search(path, search, p)
    restored = io.load_search(path, p)
    a, _ = find_critical_arnoldi(p, 1e-4, 4, restored, seed=1)
    b, _ = find_critical_arnoldi(p, 1e-4, 4, seed=1)
    a = [c.lam for c in accepted_upper(a)]
    b = [c.lam for c in accepted_upper(b)]
    k = min(len(a), len(b))
    assert k >= 1 and np.allclose(a[:k], b[:k], atol=1e-8)
    with pytest.raises(InputError):
        io.load_search(path, random_pencil(6, 6))


# --- commands -------------------------------------------------------------------


def test_model_ho_delta(tmp_path, capsys):
    out = tmp_path / "ho.json"
    assert run("model", "ho-delta", "--m", 40, "-o", out) == EXIT_OK
    p = io.load_pencil(out)
    assert p.n == 40 and p.h0_is_diagonal
    assert "N = 40" in capsys.readouterr().out


def test_model_wire2(tmp_path):
    out = tmp_path / "w.json"
    assert run("model", "wire2", "--m", 6, "--a", 0.1, "-o", out) == EXIT_OK
    assert io.load_pencil(out).meta["a"] == 0.1


def test_model_helium_small(tmp_path):
    out = tmp_path / "he.json"
    orb = tmp_path / "orb.csv"
    code = run("model", "helium", "--l", 10, "--n", 200, "--orbitals", 6, "--orbitals-csv", orb, "-o", out)
    assert code == EXIT_OK
    p = io.load_pencil(out)
    assert p.meta["model"] == "helium" and p.labels[0] == "(0,0)"
    assert orb.exists()


def test_invalid_flags_exit_input(tmp_path):
    out = tmp_path / "x.json"
    assert run("model", "helium", "--n", 201, "-o", out) == EXIT_INPUT
    with pytest.raises(SystemExit):
        run("model", "ho-delta", "--m", -3, "-o", out)
    with pytest.raises(SystemExit):
        run("crit", out, "--eps", 0, "-o", out)


def test_missing_file_exit_input(tmp_path):
    assert run("crit", tmp_path / "none.json", "-o", tmp_path / "c.json") == EXIT_INPUT


def test_crit_dense_two_level(two_level_file, tmp_path):
    out = tmp_path / "c.json"
    assert run("crit", two_level_file, "--method", "dense", "-o", out) == EXIT_OK
    doc = read(out)
    io.validate(doc, "critical_values")
    acc = [c for c in doc["critical_values"] if c["status"] == "accepted"]
    lams = sorted(complex(*c["lambda"]).imag for c in acc)
    assert np.allclose(lams, [-0.5, 0.5], atol=1e-6)
    assert all("rel_gap" in c for c in acc)


def test_crit_invit_needs_guess(two_level_file, tmp_path):
    out = tmp_path / "c.json"
    assert run("crit", two_level_file, "--method", "invit", "-o", out) == EXIT_INPUT
    assert run("crit", two_level_file, "--method", "invit", "--guess", "0.4j", "-o", out) == EXIT_OK
    lam = complex(*read(out)["critical_values"][0]["lambda"])
    assert abs(lam - 0.5j) < 1e-6


def test_crit_is_deterministic(tmp_path):
    pen = tmp_path / "ho.json"
    run("model", "ho-delta", "--m", 40, "-o", pen)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("crit", pen, "--method", "arnoldi", "--m", 10, "--seed", 7, "-o", a) == EXIT_OK
    assert run("crit", pen, "--method", "arnoldi", "--m", 10, "--seed", 7, "-o", b) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    spurious = [
        complex(*c["lambda"])
        for c in read(a)["critical_values"]
        if c["status"] == "spurious_zero_eigenvalue"
    ]
    assert any(abs(z - (-0.6758)) < 0.05 for z in spurious)


def test_seed_from_environment(two_level_file, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    monkeypatch.setenv("PERTCRIT_SEED", "11")
    run("crit", two_level_file, "--m", 2, "-o", a)
    run("crit", two_level_file, "--m", 2, "--seed", 11, "-o", b)
    assert read(a)["diagnostics"]["seed"] == 11
    assert a.read_bytes() == b.read_bytes()


def test_roc_two_level_with_tracks(two_level_file, tmp_path):
    out = tmp_path / "r.json"
    tracks = tmp_path / "tracks"
    assert run("roc", two_level_file, "--tracks-dir", tracks, "-o", out) == EXIT_OK
    doc = read(out)
    io.validate(doc, "roc_report")
    assert doc["radius"] == pytest.approx(0.5, abs=1e-6)
    assert doc["converges_at_phys"] is False
    name = doc["dominant"]["track_file"]
    rows = list(csv.reader(open(tracks / name)))
    assert rows[0][:3] == ["theta", "re_lambda", "im_lambda"]
    assert rows[0][3:7] == ["re_E0", "im_E0", "re_E1", "im_E1"]
    assert float(rows[1][0]) == 0.0 and float(rows[-1][0]) == 1.0


def test_roc_from_critvals_file(two_level_file, tmp_path):
    crit = tmp_path / "c.json"
    out = tmp_path / "r.json"
    run("crit", two_level_file, "--method", "dense", "-o", crit)
    assert run("roc", two_level_file, "--critvals", crit, "--lambda-phys", 0.3, "-o", out) == EXIT_OK
    doc = read(out)
    assert doc["converges_at_phys"] is True and doc["lambda_phys"] == 0.3


def test_roc_exhausted_exits_numerical(tmp_path):
    v = np.zeros((3, 3))
    v[1, 2] = v[2, 1] = 1.0
    pen = tmp_path / "p.json"
    io.save_pencil(HermitianPencil(np.diag([0.5, 1.0, 2.0]), v), pen)
    assert run("roc", pen, "--method", "dense", "-o", tmp_path / "r.json") == EXIT_NUMERICAL


def test_roc_resumable_exhaustion(scf, tmp_path, capsys):
    pen = tmp_path / "he.json"
    io.save_pencil(build_helium_mp(scf, 12), pen)
    out = tmp_path / "r.json"
    code = run("roc", pen, "--method", "arnoldi", "--m", 2, "--max-m", 4, "-o", out)
    assert code == EXIT_RESUMABLE
    token = out.with_suffix(".resume.npz")
    assert token.exists()
    assert "resume token" in capsys.readouterr().err
    io.load_search(token, io.load_pencil(pen))


def test_sweep_zero_perturbation_is_flat(tmp_path):
    pen = tmp_path / "p.json"
    io.save_pencil(HermitianPencil(np.diag([0.0, 1.0, 3.0]), np.zeros((3, 3))), pen)
    out = tmp_path / "s.csv"
    assert run("sweep", pen, "--from", -1, "--to", 1, "--steps", 11, "-o", out) == EXIT_OK
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["lambda", "E0", "E1", "E2"]
    e = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    assert np.allclose(e, [0.0, 1.0, 3.0])


def test_sweep_ho_delta_zero_crossing(tmp_path):
    pen = tmp_path / "ho.json"
    run("model", "ho-delta", "--m", 200, "-o", pen)
    out = tmp_path / "s.csv"
    assert run("sweep", pen, "--from", -1, "--to", 3, "--steps", 401, "--k", 3, "-o", out) == EXIT_OK
    rows = np.array([[float(x) for x in r] for r in list(csv.reader(open(out)))[1:]])
    lam, e0 = rows[:, 0], rows[:, 1]
    k = np.flatnonzero(np.diff(np.sign(e0)))[0]
    assert lam[k] == pytest.approx(-0.6758, abs=0.03)


def _roc_doc_for(path, lam):
    from pertcrit.critsolve import CriticalValue, Method, Status
    from pertcrit.tracker import BranchPoint, RocReport

    cv = CriticalValue(lam, 1e-4, 1e-4, 0j, Method.DENSE, Status.ACCEPTED)
    bp = BranchPoint(critical=cv, energy=0j, branches=(0, 1), labels=("a", "b"), involves_ground=True)
    report = RocReport(candidates=[bp], dominant=bp, radius=abs(lam), lambda_phys=1.0,
                       converges_at_phys=abs(lam) > 1.0, eps=1e-4, method="dense")
    io.write_json(path, io.roc_doc(report), "roc_report")


def test_limit_constant_family(tmp_path):
    args = []
    for m in (4, 6, 8):
        path = tmp_path / f"r{m}.json"
        _roc_doc_for(path, -1.0 + 0.5j)
        args.append(f"{m}={path}")
    out = tmp_path / "l.json"
    assert run("limit", *args, "-o", out) == EXIT_OK
    doc = read(out)
    io.validate(doc, "limit")
    assert doc["kind"] == "alpha"
    assert doc["slope"] == pytest.approx(0.0, abs=1e-12)


def test_limit_diverging_family(tmp_path):
    args = []
    for m in (8, 10, 12, 14, 16):
        path = tmp_path / f"r{m}.json"
        _roc_doc_for(path, complex(-0.1 * m, 0.5 * m))
        args.append(f"{m}={path}")
    out = tmp_path / "l.json"
    assert run("limit", *args, "-o", out) == EXIT_OK
    doc = read(out)
    assert doc["kind"] == "diverging" and doc["slope"] > 0


def test_limit_needs_three(tmp_path):
    path = tmp_path / "r.json"
    _roc_doc_for(path, 1j)
    assert run("limit", f"4={path}", f"6={path}", "-o", tmp_path / "l.json") == EXIT_INPUT
