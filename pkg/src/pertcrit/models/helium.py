"""One-dimensional helium-like model with contact interactions.

    H = h(x1) + h(x2) + delta(x1 - x2),   h = -1/2 d^2/dx^2 - Z delta(x)

The one-body problem is discretized with linear finite elements on
``[-L, L]`` (Dirichlet ends, ``n`` even so that ``x = 0`` is a node). The
closed-shell Hartree-Fock mean field for a contact interaction is
``U(x) = phi0(x)^2``, so the Fock operator is ``h + phi0^2``. The
Moller-Plesset pencil uses ``H0 = sum of orbital energies`` and
``V = delta(x1 - x2) - U(x1) - U(x2)``, so that ``H(1) = H``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from pertcrit.errors import InputError, InsufficientOrbitals, ScfNotConverged
from pertcrit.pencil import HermitianPencil

SCF_TOL = 1e-10
MAX_SCF = 200
MIXING = 0.5

# Three-point Gauss-Legendre on [0, 1]; exact for the quartic products of hat functions.
_GAUSS_T = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GAUSS_W = 0.5 * np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass(frozen=True)
class FemGrid:
    half_width: float
    intervals: int

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise InputError(f"half width must be positive, got {self.half_width}")
        if self.intervals < 4 or self.intervals % 2:
            raise InputError(f"intervals must be even and at least 4, got {self.intervals}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.intervals

    @property
    def nodes(self) -> NDArray[np.floating]:
        """Interior nodes; the boundary nodes carry the Dirichlet condition."""
        return -self.half_width + self.dx * np.arange(1, self.intervals)

    @property
    def center(self) -> int:
        return self.intervals // 2 - 1

    @property
    def size(self) -> int:
        return self.intervals - 1

    def overlap(self) -> NDArray:
        h = self.dx
        return _tridiag(self.size, 4.0 * h / 6.0, h / 6.0)

    def kinetic(self) -> NDArray:
        h = self.dx
        return 0.5 * _tridiag(self.size, 2.0 / h, -1.0 / h)

    def delta_at_origin(self) -> NDArray:
        d = np.zeros((self.size, self.size))
        d[self.center, self.center] = 1.0
        return d

    def quadrature(self) -> tuple[NDArray, NDArray]:
        """Gauss points ``x`` and weights for integrals over the whole interval."""
        left = -self.half_width + self.dx * np.arange(self.intervals)
        x = (left[:, None] + self.dx * _GAUSS_T[None, :]).ravel()
        w = np.tile(self.dx * _GAUSS_W, self.intervals)
        return x, w

    def interpolate(self, coeffs: NDArray) -> NDArray:
        """Values at the Gauss points of FEM functions; ``coeffs`` is (size, k)."""
        coeffs = np.asarray(coeffs)
        full = np.zeros((self.intervals + 1,) + coeffs.shape[1:])
        full[1:-1] = coeffs
        a = full[:-1]
        b = full[1:]
        vals = a[:, None] * (1.0 - _GAUSS_T)[None, :, None] + b[:, None] * _GAUSS_T[None, :, None] \
            if coeffs.ndim == 2 else a[:, None] * (1.0 - _GAUSS_T) + b[:, None] * _GAUSS_T
        return vals.reshape((-1,) + coeffs.shape[1:])

    def weighted_mass(self, density: NDArray) -> NDArray:
        """``M_ij = int rho(x) hat_i(x) hat_j(x) dx`` for ``rho`` given at Gauss points."""
        rho = np.asarray(density).reshape(self.intervals, 3) * (self.dx * _GAUSS_W)
        la = 1.0 - _GAUSS_T
        lb = _GAUSS_T
        aa = rho @ (la * la)
        ab = rho @ (la * lb)
        bb = rho @ (lb * lb)
        # Element e couples full nodes e and e+1; interior index is full index - 1.
        diag = aa[1:] + bb[:-1]
        off = ab[1:-1]
        m = np.diag(diag)
        m += np.diag(off, 1) + np.diag(off, -1)
        return m


def _tridiag(n: int, d: float, o: float) -> NDArray:
    return np.diag(np.full(n, d)) + np.diag(np.full(n - 1, o), 1) + np.diag(np.full(n - 1, o), -1)


@dataclass
class ScfResult:
    grid: FemGrid
    z: float
    energies: NDArray
    orbitals: NDArray  # (grid.size, k), S-orthonormal columns
    parities: NDArray  # +1 even, -1 odd
    hf_energy: float
    iterations: int
    residual: float
    mean_field: NDArray = field(repr=False)  # FEM matrix of U used in the final Fock operator
    one_body: NDArray = field(repr=False)

    @property
    def available(self) -> int:
        return self.orbitals.shape[1]

    def occupied(self) -> NDArray:
        return self.orbitals[:, 0]

    def dump_orbitals(self, path: str | Path, count: int | None = None) -> None:
        """Write ``x, chi_0(x), chi_1(x), ...`` at the interior nodes as CSV."""
        count = self.available if count is None else min(count, self.available)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"chi{p}" for p in range(count)])
            for x, row in zip(self.grid.nodes, self.orbitals[:, :count]):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in row])


def _parities(grid: FemGrid, c: NDArray) -> NDArray:
    flipped = c[::-1]
    s = np.sum(c * flipped, axis=0) / np.sum(c * c, axis=0)
    return np.where(s >= 0.0, 1, -1)


def hf_solve(
    grid: FemGrid,
    z: float,
    *,
    mixing: float = MIXING,
    scf_tol: float = SCF_TOL,
    max_scf: int = MAX_SCF,
    interaction: bool = True,
    n_orbitals: int | None = None,
) -> ScfResult:
    """Closed-shell Hartree-Fock by Roothaan-Hall iteration.

    The mean field is built from a linear mix of the new and previous
    occupied densities. Convergence is declared when the occupied orbital
    energy changes by at most ``scf_tol`` between iterations.
    """
    if not z > 0:
        raise InputError(f"nuclear charge must be positive, got {z}")
    if not 0.0 < mixing <= 1.0:
        raise InputError(f"mixing must lie in (0, 1], got {mixing}")
    s = grid.overlap()
    h = grid.kinetic() - z * grid.delta_at_origin()
    k = grid.size if n_orbitals is None else min(int(n_orbitals), grid.size)
    sel = (0, k - 1)

    e, c = sla.eigh(h, s, subset_by_index=sel)
    rho = grid.interpolate(c[:, 0]) ** 2
    u = np.zeros_like(h)
    e_old = e[0]
    residual = np.inf
    it = 0
    if interaction:
        for it in range(1, max_scf + 1):
            u = grid.weighted_mass(rho)
            e, c = sla.eigh(h + u, s, subset_by_index=sel)
            residual = abs(e[0] - e_old)
            if residual <= scf_tol:
                break
            e_old = e[0]
            rho = mixing * grid.interpolate(c[:, 0]) ** 2 + (1.0 - mixing) * rho
        else:
            raise ScfNotConverged(
                f"SCF not converged after {max_scf} iterations (residual {residual:.2e})",
                residual,
                max_scf,
            )
    else:
        residual = 0.0
    c = _fix_signs(grid, c)
    phi0 = grid.interpolate(c[:, 0])
    x, w = grid.quadrature()
    h00 = float(c[:, 0] @ h @ c[:, 0])
    coulomb = float(np.sum(w * phi0**4)) if interaction else 0.0
    return ScfResult(
        grid=grid,
        z=float(z),
        energies=e,
        orbitals=c,
        parities=_parities(grid, c),
        hf_energy=2.0 * h00 + coulomb,
        iterations=it,
        residual=float(residual),
        mean_field=u,
        one_body=h,
    )


def _fix_signs(grid: FemGrid, c: NDArray) -> NDArray:
    # Deterministic phase: the largest-magnitude nodal value is positive.
    idx = np.argmax(np.abs(c), axis=0)
    signs = np.sign(c[idx, np.arange(c.shape[1])])
    signs[signs == 0] = 1.0
    return c * signs


def analytic_hf(z: float) -> dict[str, float]:
    """Closed-form HF solution on the whole line.

    ``-1/2 phi'' - Z delta phi + phi^3 = e phi`` is solved by
    ``phi = k / sinh(k|x| + c)`` with ``k = Z - 1/2`` and ``coth c = Z / k``.
    """
    k = z - 0.5
    if not k > 0:
        raise InputError("the HF orbital is bound only for Z > 1/2")
    t = z / k
    e0 = -0.5 * k * k
    quartic = 2.0 * k**3 * ((2.0 / 3.0) - (t - t**3 / 3.0))
    return {"kappa": k, "e0": e0, "coulomb": quartic, "hf_energy": 2.0 * e0 - quartic}


def pair_basis(scf: ScfResult, m: int) -> list[tuple[int, int]]:
    """Pairs ``p <= q < m`` with even product parity, ordered by ``e_p + e_q``."""
    par = scf.parities[:m]
    pairs = [(p, q) for p in range(m) for q in range(p, m) if par[p] * par[q] > 0]
    e = scf.energies
    return sorted(pairs, key=lambda pq: (e[pq[0]] + e[pq[1]], pq))


def _pair_matrices(scf: ScfResult, m: int):
    pairs = pair_basis(scf, m)
    c = scf.orbitals[:, :m]
    grid = scf.grid
    _, w = grid.quadrature()
    chi = grid.interpolate(c)  # (nq, m)
    p = np.array([pq[0] for pq in pairs])
    q = np.array([pq[1] for pq in pairs])
    prod = chi[:, p] * chi[:, q]
    contact = prod.T @ (prod * w[:, None])
    norm = 1.0 / np.sqrt(np.where(p == q, 2.0, 1.0))
    contact *= 2.0 * np.outer(norm, norm)
    return pairs, p, q, norm, contact, c


def _one_body_pairs(a: NDArray, p, q, norm) -> NDArray:
    """Matrix of ``a(1) + a(2)`` between normalized symmetric pairs."""
    eq = lambda i, j: (i[:, None] == j[None, :]).astype(float)
    m = (
        a[p][:, p] * eq(q, q)
        + a[q][:, q] * eq(p, p)
        + a[p][:, q] * eq(q, p)
        + a[q][:, p] * eq(p, q)
    )
    return m * np.outer(norm, norm)


def build_helium_mp(scf: ScfResult, m: int) -> HermitianPencil:
    """Moller-Plesset pencil over the first ``m`` HF orbitals.

    Sector: singlet (symmetric under exchange) and even under ``x -> -x``.
    """
    m = int(m)
    if m < 1 or m > scf.available:
        raise InsufficientOrbitals(f"{m} orbitals requested, {scf.available} available")
    pairs, p, q, norm, contact, c = _pair_matrices(scf, m)
    u = c.T @ scf.mean_field @ c
    v = contact - _one_body_pairs(u, p, q, norm)
    e = scf.energies
    h0 = np.diag(e[p] + e[q])
    return HermitianPencil(
        h0,
        0.5 * (v + v.T),
        labels=[f"({a},{b})" for a, b in pairs],
        meta={
            "model": "helium",
            "Z": scf.z,
            "L": scf.grid.half_width,
            "n": scf.grid.intervals,
            "dx": scf.grid.dx,
            "M": m,
            "sector": "singlet, even parity",
            "lambda_phys": 1.0,
        },
    )


def helium_hamiltonian(scf: ScfResult, m: int) -> NDArray:
    """The full ``h(1) + h(2) + delta(x1 - x2)`` in the same pair basis, built directly."""
    pairs, p, q, norm, contact, c = _pair_matrices(scf, m)
    h = c.T @ scf.one_body @ c
    return _one_body_pairs(h, p, q, norm) + contact
