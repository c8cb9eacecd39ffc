"""Reduced electronic dynamics of a laser-driven two-channel diatomic molecule.

Propagates coupled vibrational wave packets on a grid and evaluates the
canonical decoherence rates, non-Markovianity measures, Bloch-volume witness,
entanglement entropies and electronic coherences along the trajectory.

All internal quantities are in atomic units (hbar = m_e = e = a0 = 1).
"""

__version__ = "0.1.0"

from .grid import (
    GridMismatchError,
    SpatialGrid,
    TwoChannelState,
    WaveFunction,
    apply_kinetic,
    inner_product,
    make_grid,
    vibrational_eigenstates,
)
from .models import (
    CouplingSpec,
    PotentialCurve,
    PulseEnvelope,
    ScenarioConfig,
    envelope_value,
    evaluate_potential,
)
from .units import convert_units

__all__ = [
    "CouplingSpec",
    "GridMismatchError",
    "PotentialCurve",
    "PulseEnvelope",
    "ScenarioConfig",
    "SpatialGrid",
    "TwoChannelState",
    "WaveFunction",
    "apply_kinetic",
    "convert_units",
    "envelope_value",
    "evaluate_potential",
    "inner_product",
    "make_grid",
    "vibrational_eigenstates",
]
