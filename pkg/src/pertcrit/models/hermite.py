"""Normalized Hermite functions by the stable three-term recurrence.

``phi_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2/2)`` is never formed
from factorials; the recurrence on normalized functions stays finite for
large ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pertcrit.errors import InputError

PI_QUARTER = np.pi ** -0.25


def hermite_functions(nmax: int, x: ArrayLike, *, weight: bool = True) -> NDArray[np.floating]:
    """Rows ``phi_0 .. phi_nmax`` evaluated at ``x``.

    With ``weight=False`` the Gaussian factor ``exp(-x^2/2)`` is omitted, which
    is the form Gauss-Hermite quadrature expects.
    """
    if nmax < 0:
        raise InputError("nmax must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = PI_QUARTER
    if nmax >= 1:
        out[1] = np.sqrt(2.0) * x * PI_QUARTER
    for n in range(2, nmax + 1):
        out[n] = np.sqrt(2.0 / n) * x * out[n - 1] - np.sqrt((n - 1) / n) * out[n - 2]
    if weight:
        out *= np.exp(-0.5 * x * x)
    return out


def hermite_at_zero(nmax: int) -> NDArray[np.floating]:
    """``phi_k(0)`` for ``k = 0..nmax``; odd entries vanish."""
    out = np.zeros(nmax + 1)
    out[0] = PI_QUARTER
    for k in range(2, nmax + 1, 2):
        out[k] = -np.sqrt((k - 1) / k) * out[k - 2]
    return out


@dataclass(frozen=True)
class HermiteBasisSpec:
    """The even oscillator functions ``u_n = phi_{2n}``, ``n < count``."""

    count: int

    def __post_init__(self) -> None:
        if self.count < 2:
            raise InputError(f"basis count must be at least 2, got {self.count}")

    def energies(self) -> NDArray[np.floating]:
        return 2.0 * np.arange(self.count) + 0.5

    def labels(self) -> list[str]:
        return [f"phi{2 * n}" for n in range(self.count)]

    def evaluate(self, x: ArrayLike, *, weight: bool = True) -> NDArray[np.floating]:
        return hermite_functions(2 * self.count - 2, x, weight=weight)[::2]

    def at_zero(self) -> NDArray[np.floating]:
        return hermite_at_zero(2 * self.count - 2)[::2]
