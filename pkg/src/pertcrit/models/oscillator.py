"""Oscillator-basis models: the delta-spiked oscillator and the two-electron wire analog."""

from __future__ import annotations

import numpy as np
from scipy.special import roots_hermite

from pertcrit.errors import InputError, QuadratureNotConverged
from pertcrit.models.hermite import HermiteBasisSpec
from pertcrit.pencil import HermitianPencil

QUAD_TOL = 1e-12
QUAD_START = 64
QUAD_MAX = 1 << 18

SECTOR_EVEN = "even parity"


def build_ho_delta(m: int) -> HermitianPencil:
    """``-1/2 d^2/dx^2 + x^2/2 + lam delta(x)`` in the even oscillator basis.

    ``H0 = diag(2n + 1/2)`` and ``V_nm = phi_2n(0) phi_2m(0)`` (rank one).
    Odd functions vanish at the origin and decouple, so the pencil covers the
    even sector only.
    """
    basis = HermiteBasisSpec(int(m))
    u0 = basis.at_zero()
    return HermitianPencil(
        np.diag(basis.energies()),
        np.outer(u0, u0),
        labels=basis.labels(),
        meta={"model": "ho-delta", "M": basis.count, "sector": SECTOR_EVEN, "lambda_phys": 1.0},
    )


def wire_interaction(r, a: float):
    """Softened Coulomb repulsion in the relative coordinate ``r = (x1 - x2)/sqrt(2)``."""
    return 1.0 / np.sqrt(2.0 * np.asarray(r) ** 2 + a * a)


def _gh_matrix(basis: HermiteBasisSpec, a: float, nodes: int) -> np.ndarray:
    x, w = roots_hermite(nodes)
    f = basis.evaluate(x, weight=False)
    return (f * (w * wire_interaction(x, a))) @ f.T


def wire_matrix(m: int, a: float, *, tol: float = QUAD_TOL, max_nodes: int = QUAD_MAX) -> np.ndarray:
    """``V_nm = int u(r) phi_2n(r) phi_2m(r) dr`` by Gauss-Hermite with node doubling."""
    basis = HermiteBasisSpec(int(m))
    nodes = max(QUAD_START, 4 * basis.count)
    prev = _gh_matrix(basis, a, nodes)
    while nodes < max_nodes:
        nodes *= 2
        cur = _gh_matrix(basis, a, nodes)
        change = float(np.max(np.abs(cur - prev)))
        if change <= tol:
            return 0.5 * (cur + cur.T)
        prev = cur
    raise QuadratureNotConverged(
        f"Gauss-Hermite quadrature did not reach {tol:g} with {max_nodes} nodes (last change {change:.2e})"
    )


def build_wire2(m: int, a: float = 0.1) -> HermitianPencil:
    """Two electrons in a harmonic wire, reduced to the relative coordinate.

    The centre-of-mass motion separates off. The spatially symmetric (singlet)
    states are even in ``r``, so the basis is the even oscillator functions
    with ``H0 = diag(2n + 1/2)``; the interaction strength is ``lam``.
    """
    if not a > 0:
        raise InputError(f"softening length must be positive, got {a}")
    basis = HermiteBasisSpec(int(m))
    v = wire_matrix(basis.count, a)
    return HermitianPencil(
        np.diag(basis.energies()),
        v,
        labels=basis.labels(),
        meta={
            "model": "wire2",
            "M": basis.count,
            "a": float(a),
            "sector": "singlet, even relative motion",
            "lambda_phys": 1.0,
        },
    )
