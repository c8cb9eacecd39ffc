"""Reduced electronic density matrix and entanglement / coherence scalars."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import TwoChannelState

NORM_TOL = 1e-8
POSITIVITY_TOL = 1e-8


class PositivityError(ValueError):
    """Reduced density matrix is not a valid state; points at a propagation bug."""


@dataclass(frozen=True)
class ReducedDensity2:
    """Two-level reduced density matrix.

    ``c`` is the overlap <psi_g|psi_e>; the matrix element <g|rho|e> is its
    conjugate. ``gap`` is P_g P_e - |c|^2 when it was computed directly from
    the wave functions (accurate even when the state is nearly separable).
    """

    p_g: float
    p_e: float
    c: complex
    gap: Optional[float] = None

    def __post_init__(self):
        if abs(self.p_g + self.p_e - 1.0) > NORM_TOL:
            raise PositivityError(f"populations sum to {self.p_g + self.p_e!r}, not 1")
        for p in (self.p_g, self.p_e):
            if p < -POSITIVITY_TOL or p > 1 + POSITIVITY_TOL:
                raise PositivityError(f"population {p!r} outside [0, 1]")
        if abs(self.c) ** 2 > self.p_g * self.p_e + POSITIVITY_TOL:
            raise PositivityError("|c|^2 exceeds P_g P_e: density matrix not positive")

    @property
    def purity_gap(self) -> float:
        if self.gap is not None:
            return self.gap
        return max(self.p_g * self.p_e - abs(self.c) ** 2, 0.0)

    def matrix(self) -> np.ndarray:
        """Matrix in the ordered basis (g, e)."""
        return np.array([[self.p_g, np.conj(self.c)], [self.c, self.p_e]], dtype=complex)


def purity_gap_from_arrays(g: np.ndarray, e: np.ndarray, dr: float) -> float:
    """P_g P_e - |<g|e>|^2 without cancellation.

    Equals P_big * ||small - (<big|small>/P_big) big||^2 where ``big`` is the
    more populated channel.
    """
    pg = np.vdot(g, g).real * dr
    pe = np.vdot(e, e).real * dr
    big, small, p_big = (g, e, pg) if pg >= pe else (e, g, pe)
    if p_big == 0.0:
        return 0.0
    proj = np.vdot(big, small) * dr / p_big
    resid = small - proj * big
    return float(p_big * np.vdot(resid, resid).real * dr)


def reduced_density_from_arrays(g: np.ndarray, e: np.ndarray, dr: float) -> ReducedDensity2:
    pg = float(np.vdot(g, g).real * dr)
    pe = float(np.vdot(e, e).real * dr)
    c = complex(np.vdot(g, e) * dr)
    return ReducedDensity2(pg, pe, c, purity_gap_from_arrays(g, e, dr))


def reduced_density(state: TwoChannelState) -> ReducedDensity2:
    return reduced_density_from_arrays(
        state.psi_g.amplitudes, state.psi_e.amplitudes, state.grid.dr
    )


@dataclass(frozen=True)
class CorrelationScalars:
    L: float
    S_vN: float
    C_l1: float
    IS_factor: float
    PgPe: float


def _xlog2x(p: float) -> float:
    return 0.0 if p <= 0.0 else p * math.log2(p)


def correlation_scalars(rho: ReducedDensity2) -> CorrelationScalars:
    """Linear and von Neumann entropies, l1 coherence and the skew-information
    time factor |c|^2 / (1 + sqrt(2L))."""
    lin = 2.0 * rho.purity_gap
    c2 = abs(rho.c) ** 2
    return CorrelationScalars(
        L=lin,
        S_vN=-_xlog2x(rho.p_g) - _xlog2x(rho.p_e),
        C_l1=2.0 * abs(rho.c),
        IS_factor=c2 / (1.0 + math.sqrt(2.0 * lin)),
        PgPe=rho.p_g * rho.p_e,
    )


def linear_entropy_matrix(rho: ReducedDensity2) -> float:
    """1 - Tr(rho^2) by explicit 2x2 matrix algebra.

    Purity is taken relative to (Tr rho)^2 so that round-off drift of the
    norm does not leak into the entropy.
    """
    m = rho.matrix()
    tr = np.trace(m).real
    return float(1.0 - np.trace(m @ m).real / (tr * tr))


def energy_uncertainty_factor(rho: ReducedDensity2) -> float:
    """P_g P_e, the time factor of the electronic-energy variance.

    The full variance is (V_g(R) - V_e(R))^2 times this factor; the R-profile
    comes from :meth:`PotentialCurve.difference_profile`.
    """
    return rho.p_g * rho.p_e
