"""Named scenarios shipped with the package.

``morse-pair`` is the crossing surrogate: an excited vibrational level of a
Morse well (channel e) is laser-coupled to a shallower, wider Morse well
(channel g) whose curve crosses it inside the classically allowed region.
The pulse timing is written in the scenario time unit ``tu`` (520 a.u. of
time, about a 25th of the initial level's vibrational period), with a
50 tu onset, 50 tu rise, 95 tu plateau and 55 tu fall.

The three oracle scenarios have closed-form solutions, see :mod:`oracles`.
"""

from __future__ import annotations

import copy

MORSE_PAIR_STRENGTH_CM1 = 6.6

_MORSE_PAIR = {
    "name": "morse-pair",
    "time_unit": {"name": "tu", "au": 520.0},
    "grid": {"r_min": 3.9, "r_max": 163.9, "n_points": 1024},
    "mass": 10000.0,
    "potentials": {
        "e": {"kind": "morse", "D_e": 0.01, "a": 0.5, "r0": 6.0},
        "g": {"kind": "morse", "D_e": 0.006, "a": 0.3, "r0": 7.0, "offset": 0.0011915},
    },
    "coupling": {
        "strength": f"{MORSE_PAIR_STRENGTH_CM1} cm-1",
        "envelope": {
            "t_start": "50 tu", "t_rise": "50 tu", "t_plateau": "95 tu", "t_fall": "55 tu",
            "shape": "sine-squared",
        },
    },
    "initial_state": {"channel": "e", "kind": "eigenstate", "index": 8},
    "integrator": {"method": "split-operator", "dt": "auto", "t_final": "495 tu",
                   "sample_stride": 1},
    "guards": {"eps_pop": 1e-6, "eps_overlap": 1e-6},
    "report": {"intervals": ["50 tu", "100 tu", "195 tu", "250 tu", "495 tu"]},
}


def _scaled(base: dict, factor: int) -> dict:
    out = copy.deepcopy(base)
    out["name"] = f"{base['name']}-{factor}x"
    out["coupling"]["strength"] = f"{MORSE_PAIR_STRENGTH_CM1 * factor:g} cm-1"
    return out


# resonant Rabi cycling between identical flat channels
_RABI_FLAT = {
    "name": "rabi-flat",
    "grid": {"r_min": -20.0, "r_max": 20.0, "n_points": 256},
    "mass": 1000.0,
    "potentials": {"g": {"kind": "flat"}, "e": {"kind": "flat"}},
    "coupling": {"strength": 1e-3, "envelope": "constant"},
    "initial_state": {"channel": "e", "kind": "gaussian", "center": 0.0, "width": 2.0},
    "integrator": {"method": "split-operator", "dt": "auto", "t_final": 6283.185307179586,
                   "sample_stride": 4},
}

# frozen ground state in g, coherent oscillation in a displaced well in e
_DISPLACED_HARMONIC = {
    "name": "displaced-harmonic",
    "grid": {"r_min": -3.0, "r_max": 4.0, "n_points": 128},
    "mass": 1000.0,
    "potentials": {
        "g": {"kind": "harmonic", "r0": 0.0, "omega": 0.01},
        "e": {"kind": "harmonic", "r0": 0.894427190999916, "omega": 0.01, "offset": -0.005},
    },
    "coupling": {"strength": 0.0, "envelope": "constant"},
    "initial_state": {"channel": "e", "kind": "eigenstate", "index": 0, "potential": "g",
                      "p_g": 0.5},
    "integrator": {"method": "split-operator", "dt": 0.06283185307179587, "t_final": 1256.6370614359173,
                   "sample_stride": 1},
}

# dispersion of a free packet; the e channel alone is populated
_FREE_GAUSSIAN = {
    "name": "free-gaussian",
    "grid": {"r_min": -100.0, "r_max": 100.0, "n_points": 1024},
    "mass": 100.0,
    "potentials": {"g": {"kind": "flat"}, "e": {"kind": "flat"}},
    "coupling": {"strength": 0.0, "envelope": "constant"},
    "initial_state": {"channel": "e", "kind": "gaussian", "center": 0.0, "width": 1.0},
    "integrator": {"method": "split-operator", "dt": "auto", "t_final": 2000.0,
                   "sample_stride": 50},
}

PRESETS = {
    "morse-pair": _MORSE_PAIR,
    "morse-pair-2x": _scaled(_MORSE_PAIR, 2),
    "morse-pair-4x": _scaled(_MORSE_PAIR, 4),
    "rabi-flat": _RABI_FLAT,
    "displaced-harmonic": _DISPLACED_HARMONIC,
    "free-gaussian": _FREE_GAUSSIAN,
}

LADDER = ("morse-pair", "morse-pair-2x", "morse-pair-4x")


def preset_raw(name: str) -> dict:
    """Deep copy of the raw mapping behind a preset name."""
    return copy.deepcopy(PRESETS[name])


def preset_config(name: str, overrides: dict | None = None):
    """Resolved :class:`ScenarioConfig` for a preset; ``overrides`` maps
    dotted paths to values, e.g. ``{"coupling.strength": 0.0}``."""
    from .config import build_config, set_field

    raw = preset_raw(name)
    for path, value in (overrides or {}).items():
        raw = set_field(raw, path, value)
    return build_config(raw)
