"""``pertcrit`` command line: build model pencils, find critical values, compute the ROC.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 resumable
exhaustion (a resume token is written). ``PERTCRIT_SEED`` overrides the
default random seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from pertcrit import io
from pertcrit.critsolve import (
    LAMBDA_CAP,
    TOL_REAL,
    default_seed,
    extrapolate_eps,
    find_critical_arnoldi,
    find_critical_dense,
    refine_inverse_iteration,
)
from pertcrit.errors import InputError, NeedMoreCandidates, NumericalError, PertcritError
from pertcrit.pencil import DEFAULT_EPS, DENSE_CAP, DeltaOperator
from pertcrit.tracker import DEFAULT_SAMPLES, classify_limit, compute_roc, sweep_branches

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_RESUMABLE = 4


def positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (x > 0 and np.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return x


def positive_int(text: str) -> int:
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return x


def finite_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not np.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return x


def complex_arg(text: str) -> complex:
    """``RE,IM`` or a Python complex literal such as ``-1.1+0.02j``."""
    try:
        if "," in text:
            re, im = text.split(",")
            z = complex(float(re), float(im))
        else:
            z = complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None
    if not np.isfinite(z) or z == 0:
        raise argparse.ArgumentTypeError(f"must be finite and nonzero: {text!r}")
    return z


def family_arg(text: str) -> tuple[float, str]:
    size, sep, path = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected M=FILE, got {text!r}")
    return finite_float(size), path


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=positive_float, default=DEFAULT_EPS)
    p.add_argument("--m", type=positive_int, default=10, help="number of candidates wanted")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $PERTCRIT_SEED)")
    p.add_argument("--tol-real", type=positive_float, default=TOL_REAL)
    p.add_argument("--lambda-cap", type=positive_float, default=LAMBDA_CAP)
    p.add_argument("--dense-cap", type=positive_int, default=DENSE_CAP)
    p.add_argument("--guess", type=complex_arg, action="append", default=None,
                   help="starting value for inverse iteration; repeatable")
    p.add_argument("--resume", type=Path, default=None, help="resume token from an earlier run")
    p.add_argument("--token-out", type=Path, default=None,
                   help="where to write the resume token on exhaustion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pertcrit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", help="build a model pencil")
    m.add_argument("name", choices=["ho-delta", "wire2", "helium"])
    m.add_argument("--m", type=positive_int, default=20, help="basis size (ho-delta, wire2)")
    m.add_argument("--a", type=positive_float, default=0.1, help="softening length (wire2)")
    m.add_argument("--z", type=positive_float, default=1.38, help="nuclear charge (helium)")
    m.add_argument("--l", type=positive_float, default=15.0, help="box half width (helium)")
    m.add_argument("--n", type=positive_int, default=1000, help="FEM intervals (helium)")
    m.add_argument("--orbitals", type=positive_int, default=20, help="HF orbitals (helium)")
    m.add_argument("--mixing", type=positive_float, default=0.5)
    m.add_argument("--orbitals-csv", type=Path, default=None, help="dump HF orbitals here")
    m.add_argument("-o", "--out", type=Path, required=True)

    c = sub.add_parser("crit", help="critical values of a pencil")
    c.add_argument("pencil", type=Path)
    c.add_argument("--method", choices=["dense", "arnoldi", "invit"], default="arnoldi")
    c.add_argument("--extrapolate", action="store_true",
                   help="Richardson-extrapolate accepted values in eps")
    _add_solver_flags(c)
    c.add_argument("-o", "--out", type=Path, required=True)

    r = sub.add_parser("roc", help="dominant branch point and radius of convergence")
    r.add_argument("pencil", type=Path)
    r.add_argument("--critvals", type=Path, default=None, help="critical values from `crit`")
    r.add_argument("--method", choices=["auto", "dense", "arnoldi", "invit"], default="auto")
    r.add_argument("--samples", type=positive_int, default=DEFAULT_SAMPLES)
    r.add_argument("--lambda-phys", type=finite_float, default=None)
    r.add_argument("--max-m", type=positive_int, default=None)
    r.add_argument("--seed-roc", type=Path, default=None,
                   help="ROC report of a coarser model whose dominant point seeds inverse iteration")
    _add_solver_flags(r)
    r.add_argument("--tracks-dir", type=Path, default=None, help="directory for track CSVs")
    r.add_argument("-o", "--out", type=Path, required=True)

    s = sub.add_parser("sweep", help="eigenvalue branches over a real lambda range")
    s.add_argument("pencil", type=Path)
    s.add_argument("--from", dest="lam_from", type=finite_float, required=True)
    s.add_argument("--to", dest="lam_to", type=finite_float, required=True)
    s.add_argument("--steps", type=positive_int, default=201)
    s.add_argument("--k", type=positive_int, default=None, help="number of lowest branches")
    s.add_argument("-o", "--out", type=Path, required=True)

    lim = sub.add_parser("limit", help="classify a branch point across basis sizes")
    lim.add_argument("reports", nargs="+", type=family_arg, metavar="M=ROC_JSON")
    lim.add_argument("-o", "--out", type=Path, required=True)
    return parser


def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def _write_token(args, search, pencil) -> Path:
    path = args.token_out or args.out.with_suffix(".resume.npz")
    io.save_search(path, search, pencil)
    return path


def cmd_model(args) -> int:
    from pertcrit.models import build_helium_mp, build_ho_delta, build_wire2, FemGrid, hf_solve

    if args.name == "ho-delta":
        pencil = build_ho_delta(args.m)
    elif args.name == "wire2":
        pencil = build_wire2(args.m, args.a)
    else:
        if args.n % 2:
            raise InputError("--n must be even so that x = 0 is a grid node")
        grid = FemGrid(args.l, args.n)
        scf = hf_solve(grid, args.z, mixing=min(args.mixing, 1.0), n_orbitals=args.orbitals)
        if args.orbitals_csv is not None:
            scf.dump_orbitals(args.orbitals_csv, args.orbitals)
        pencil = build_helium_mp(scf, args.orbitals)
        print(f"SCF converged in {scf.iterations} iterations, E_HF = {scf.hf_energy:.10f}")
    io.save_pencil(pencil, args.out)
    print(f"N = {pencil.n}; sector: {pencil.meta.get('sector', 'unspecified')}")
    return EXIT_OK


def cmd_crit(args) -> int:
    pencil = io.load_pencil(args.pencil)
    seed = _seed(args)
    kw = dict(tol_real=args.tol_real, lambda_cap=args.lambda_cap)
    diagnostics: dict = {"method": args.method, "seed": seed}
    if args.method == "dense":
        cvs = find_critical_dense(pencil, args.eps, cap=args.dense_cap, **kw)
    elif args.method == "invit":
        if not args.guess:
            raise InputError("--method invit needs at least one --guess")
        cvs = [refine_inverse_iteration(pencil, args.eps, g, seed=seed, **kw) for g in args.guess]
    else:
        search = io.load_search(args.resume, pencil) if args.resume else None
        try:
            cvs, search = find_critical_arnoldi(pencil, args.eps, args.m, search, seed=seed, **kw)
        except NumericalError as exc:
            state = getattr(exc, "state", None)
            if state is not None:
                print(f"resume token: {_write_token(args, state, pencil)}", file=sys.stderr)
            raise
        diagnostics.update(
            matvecs=search.state.matvecs,
            restarts=search.state.restarts,
            shift=io.cpair(search.shift),
            operator=DeltaOperator(pencil, args.eps, search.shift).diagnostics(),
        )
        diagnostics["operator"]["shift"] = io.cpair(search.shift)
        if args.token_out is not None:
            io.save_search(args.token_out, search, pencil)
    if args.extrapolate:
        cvs = [extrapolate_eps(pencil, cv, seed=seed, **kw) if cv.accepted else cv for cv in cvs]
    io.write_json(args.out, io.critical_list_doc(cvs, diagnostics=diagnostics), "critical_values")
    counts: dict[str, int] = {}
    for cv in cvs:
        counts[cv.status.value] = counts.get(cv.status.value, 0) + 1
    print(", ".join(f"{k}: {v}" for k, v in sorted(counts.items())) or "no candidates")
    return EXIT_OK


def cmd_roc(args) -> int:
    pencil = io.load_pencil(args.pencil)
    seed = _seed(args)
    guesses = list(args.guess or [])
    if args.seed_roc is not None:
        guesses.append(io.dominant_from_roc_doc(io.read_json(args.seed_roc)))
    method = {"invit": "inverse_iteration"}.get(args.method, args.method)
    if guesses and method == "auto":
        method = "inverse_iteration"
    critvals = io.load_critical_values(args.critvals) if args.critvals else None
    search = io.load_search(args.resume, pencil) if args.resume else None
    try:
        report = compute_roc(
            pencil,
            args.eps,
            args.m,
            args.lambda_phys,
            method=method,
            samples=args.samples,
            max_m=args.max_m,
            critical_values=critvals,
            search=search,
            tol_real=args.tol_real,
            lambda_cap=args.lambda_cap,
            seed=seed,
            guesses=guesses or None,
            dense_cap=args.dense_cap,
        )
    except NeedMoreCandidates as exc:
        if exc.state is not None:
            print(f"resume token: {_write_token(args, exc.state, pencil)}", file=sys.stderr)
        raise
    files: list[str | None] = [None] * report.candidates_examined
    if args.tracks_dir is not None:
        args.tracks_dir.mkdir(parents=True, exist_ok=True)
        for k, bp in enumerate(report.candidates):
            name = f"track_{k:03d}.csv"
            io.write_track_csv(args.tracks_dir / name, bp.track)
            files[k] = name
    io.write_json(args.out, io.roc_doc(report, files), "roc_report")
    d = report.dominant
    print(
        f"R = {report.radius:.10g} at lambda* = {d.lam.real:.10g}{d.lam.imag:+.10g}i "
        f"({d.labels[0]} / {d.labels[1]}); candidates examined: {report.candidates_examined}; "
        f"series {'converges' if report.converges_at_phys else 'diverges'} at "
        f"lambda = {report.lambda_phys:g}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    pencil = io.load_pencil(args.pencil)
    if args.steps < 2:
        raise InputError("--steps must be at least 2")
    lams = np.linspace(args.lam_from, args.lam_to, args.steps)
    energies = sweep_branches(pencil, lams, args.k)
    io.write_sweep_csv(args.out, lams, energies)
    print(f"{energies.shape[1]} branches over {args.steps} points written")
    return EXIT_OK


def cmd_limit(args) -> int:
    family = []
    for size, path in args.reports:
        family.append((size, io.dominant_from_roc_doc(io.read_json(path))))
    lc = classify_limit(family)
    io.write_json(args.out, io.limit_doc(lc), "limit")
    trend = f"slope {lc.slope:.4g}" if lc.beta is None else f"beta {lc.beta:.4g}"
    print(f"{lc.kind.value}; {trend}")
    return EXIT_OK


COMMANDS = {
    "model": cmd_model,
    "crit": cmd_crit,
    "roc": cmd_roc,
    "sweep": cmd_sweep,
    "limit": cmd_limit,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NeedMoreCandidates as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESUMABLE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, PertcritError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
