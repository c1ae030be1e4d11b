"""JSON and CSV formats for pencils, critical values, ROC reports and limits.

Complex numbers are stored as ``[re, im]``; matrices as row-major lists of
such pairs. Python's float repr is the shortest string that round-trips, so
writing and reading a pencil is lossless.
"""

from __future__ import annotations

import csv
import hashlib
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema
import numpy as np

from pertcrit.arnoldi import ArnoldiState
from pertcrit.critsolve import ArnoldiSearch, CriticalValue, Method, Status
from pertcrit.errors import InputError
from pertcrit.pencil import HermitianPencil
from pertcrit.tracker import BranchPoint, BranchTrack, LimitClassification, RocReport

FORMAT_VERSION = 1


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("pertcrit.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: Any, name: str) -> None:
    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as exc:
        raise InputError(f"{name} document invalid: {exc.message}") from exc


def cpair(z: complex | None) -> list[float] | None:
    if z is None:
        return None
    z = complex(z)
    return [float(z.real), float(z.imag)]


def from_cpair(p) -> complex | None:
    if p is None:
        return None
    return complex(float(p[0]), float(p[1]))


def _matrix_doc(a: np.ndarray) -> list[list[float]]:
    a = np.asarray(a, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in a.ravel(order="C")]


def _matrix_from(doc, n: int, name: str) -> np.ndarray:
    arr = np.asarray(doc, dtype=float)
    if arr.shape != (n * n, 2):
        raise InputError(f"{name} must hold n^2 = {n * n} [re, im] pairs")
    m = (arr[:, 0] + 1j * arr[:, 1]).reshape(n, n)
    return m.real.copy() if not np.any(arr[:, 1]) else m


def _plain(obj: Any) -> Any:
    """Make ``meta`` JSON-safe (numpy scalars, tuples)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def pencil_to_doc(p: HermitianPencil) -> dict:
    return {
        "n": p.n,
        "h0": _matrix_doc(p.h0),
        "v": _matrix_doc(p.v),
        "labels": list(p.labels) if p.labels is not None else [f"E{k}" for k in range(p.n)],
        "meta": _plain(p.meta),
    }


def pencil_from_doc(doc: dict) -> HermitianPencil:
    validate(doc, "pencil")
    n = int(doc["n"])
    return HermitianPencil(
        _matrix_from(doc["h0"], n, "h0"),
        _matrix_from(doc["v"], n, "v"),
        labels=doc.get("labels"),
        meta=doc.get("meta", {}),
    )


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, doc: Any, name: str | None = None) -> None:
    if name is not None:
        validate(doc, name)
    Path(path).write_text(dumps(doc))


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def save_pencil(p: HermitianPencil, path: str | Path) -> None:
    write_json(path, pencil_to_doc(p), "pencil")


def load_pencil(path: str | Path) -> HermitianPencil:
    return pencil_from_doc(read_json(path))


def pencil_fingerprint(p: HermitianPencil) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(p.h0, dtype=complex).tobytes())
    h.update(np.ascontiguousarray(p.v, dtype=complex).tobytes())
    return h.hexdigest()


def critical_to_doc(cv: CriticalValue) -> dict:
    return {
        "lambda": cpair(cv.lam),
        "eps": cv.eps,
        # No eigenvalue pair at all (N = 1 or a zero level) gives an infinite gap.
        "rel_gap": cv.rel_gap if np.isfinite(cv.rel_gap) else None,
        "paired_energy": cpair(cv.paired_energy),
        "method": cv.method.value,
        "status": cv.status.value,
        "residual": cv.residual,
        "lambda_eps": cpair(cv.lambda_eps),
        "lambda_half": cpair(cv.lambda_half),
        "iterations": cv.iterations,
    }


def critical_from_doc(doc: dict) -> CriticalValue:
    return CriticalValue(
        lam=from_cpair(doc["lambda"]),
        eps=float(doc["eps"]),
        rel_gap=np.inf if doc["rel_gap"] is None else float(doc["rel_gap"]),
        paired_energy=from_cpair(doc["paired_energy"]),
        method=Method(doc["method"]),
        status=Status(doc["status"]),
        residual=doc.get("residual"),
        lambda_eps=from_cpair(doc.get("lambda_eps")),
        lambda_half=from_cpair(doc.get("lambda_half")),
        iterations=doc.get("iterations"),
    )


def critical_list_doc(cvs: Iterable[CriticalValue], **extra) -> dict:
    doc = {"version": FORMAT_VERSION, "critical_values": [critical_to_doc(c) for c in cvs]}
    doc.update(extra)
    return doc


def load_critical_values(path: str | Path) -> list[CriticalValue]:
    doc = read_json(path)
    validate(doc, "critical_values")
    return [critical_from_doc(d) for d in doc["critical_values"]]


def branch_point_doc(bp: BranchPoint, track_file: str | None = None) -> dict:
    return {
        "critical": critical_to_doc(bp.critical),
        "energy": cpair(bp.energy),
        "branches": list(bp.branches),
        "labels": list(bp.labels),
        "involves_ground": bp.involves_ground,
        "track_file": track_file,
        "refinements": bp.track.refinements if bp.track is not None else None,
        "samples": len(bp.track.thetas) if bp.track is not None else None,
    }


def roc_doc(report: RocReport, track_files: list[str | None] | None = None) -> dict:
    files = track_files or [None] * len(report.candidates)
    return {
        "version": FORMAT_VERSION,
        "radius": report.radius,
        "lambda_phys": report.lambda_phys,
        "converges_at_phys": report.converges_at_phys,
        "eps": report.eps,
        "method": report.method,
        "candidates_examined": report.candidates_examined,
        "dominant": branch_point_doc(
            report.dominant, files[report.candidates.index(report.dominant)]
        ),
        "candidates": [branch_point_doc(bp, f) for bp, f in zip(report.candidates, files)],
    }


def dominant_from_roc_doc(doc: dict) -> complex:
    validate(doc, "roc_report")
    return from_cpair(doc["dominant"]["critical"]["lambda"])


def limit_doc(lc: LimitClassification) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": lc.kind.value,
        "sizes": lc.sizes,
        "values": [cpair(v) for v in lc.values],
        "radii": [abs(complex(v)) for v in lc.values],
        "limit": cpair(lc.limit),
        "slope": lc.slope,
        "intercept": lc.intercept,
        "beta": lc.beta,
        "details": lc.details,
    }


def write_track_csv(path: str | Path, track: BranchTrack) -> None:
    """Columns ``theta, re_lambda, im_lambda`` then ``re_E<k>, im_E<k>`` per track."""
    n = track.tracks.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["theta", "re_lambda", "im_lambda"]
        for k in range(n):
            header += [f"re_E{k}", f"im_E{k}"]
        w.writerow(header)
        for j, (t, lam) in enumerate(zip(track.thetas, track.path)):
            row = [repr(float(t)), repr(float(lam.real)), repr(float(lam.imag))]
            for z in track.tracks[:, j]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)


def write_sweep_csv(path: str | Path, lams: np.ndarray, energies: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda"] + [f"E{k}" for k in range(energies.shape[1])])
        for lam, row in zip(lams, energies):
            w.writerow([repr(float(lam))] + [repr(float(e)) for e in row])


def save_search(path: str | Path, search: ArnoldiSearch, pencil: HermitianPencil) -> None:
    """Resume token: the Arnoldi state plus the settings it was built with."""
    st = search.state
    with open(path, "wb") as fh:
        np.savez(
            fh,
            basis=st.basis,
            hessenberg=st.hessenberg,
            counters=np.array([st.steps_done, st.matvecs, st.restarts, search.seed, search.m]),
            eps=np.array(search.eps),
            shift=np.array(search.shift),
            fingerprint=np.array(pencil_fingerprint(pencil)),
        )


def load_search(path: str | Path, pencil: HermitianPencil) -> ArnoldiSearch:
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read resume token {path}: {exc}") from exc
    if str(data["fingerprint"]) != pencil_fingerprint(pencil):
        raise InputError("resume token belongs to a different pencil")
    steps, matvecs, restarts, seed, m = (int(x) for x in data["counters"])
    state = ArnoldiState(data["basis"], data["hessenberg"], steps, matvecs, restarts)
    return ArnoldiSearch(state, float(data["eps"]), complex(data["shift"]), seed, m)
