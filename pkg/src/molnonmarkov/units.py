"""Unit conversion at the configuration and report boundaries.

Internally everything is atomic units. The constants below are CODATA 2018
values and are the only place conversion factors are defined.
"""

from __future__ import annotations

HARTREE_IN_CM1 = 219474.6313632
ATOMIC_TIME_IN_PS = 2.4188843265857e-5
BOHR_IN_ANGSTROM = 0.529177210903
AMU_IN_ELECTRON_MASS = 1822.888486209

_ALIASES = {
    "hartree": "hartree",
    "eh": "hartree",
    "cm-1": "cm-1",
    "cm^-1": "cm-1",
    "cm⁻¹": "cm-1",
    "1/cm": "cm-1",
    "au_time": "au_time",
    "atu": "au_time",
    "ps": "ps",
    "bohr": "bohr",
    "a0": "bohr",
    "angstrom": "angstrom",
    "å": "angstrom",
    "a": "angstrom",
    "amu": "amu",
    "u": "amu",
    "dalton": "amu",
    "me": "me",
    "electron_mass": "me",
}

# unit -> (dimension, number of these units in one atomic unit)
_UNITS = {
    "hartree": ("energy", 1.0),
    "cm-1": ("energy", HARTREE_IN_CM1),
    "au_time": ("time", 1.0),
    "ps": ("time", ATOMIC_TIME_IN_PS),
    "bohr": ("length", 1.0),
    "angstrom": ("length", BOHR_IN_ANGSTROM),
    "me": ("mass", 1.0),
    "amu": ("mass", 1.0 / AMU_IN_ELECTRON_MASS),
}

ATOMIC_UNIT = {"energy": "hartree", "time": "au_time", "length": "bohr", "mass": "me"}


class UnitError(ValueError):
    """Unknown unit or a conversion between incompatible dimensions."""


def canonical_unit(name: str) -> str:
    key = name.strip().lower()
    if key not in _ALIASES:
        raise UnitError(f"unsupported unit {name!r}")
    return _ALIASES[key]


def dimension_of(unit: str) -> str:
    return _UNITS[canonical_unit(unit)][0]


def convert_units(value, from_unit: str, to_unit: str):
    """Convert ``value`` (scalar or array) between two units of one dimension.

    Examples
    --------
    >>> convert_units(219474.6313632, "cm-1", "hartree")
    1.0
    """
    src = canonical_unit(from_unit)
    dst = canonical_unit(to_unit)
    dim_src, per_au_src = _UNITS[src]
    dim_dst, per_au_dst = _UNITS[dst]
    if dim_src != dim_dst:
        raise UnitError(f"cannot convert {dim_src} ({from_unit}) to {dim_dst} ({to_unit})")
    if src == dst:
        return value
    if per_au_dst == 1.0:
        return value / per_au_src
    return value / per_au_src * per_au_dst


def to_atomic(value, unit: str):
    return convert_units(value, unit, ATOMIC_UNIT[dimension_of(unit)])
