"""Potential curves, pulse envelopes, coupling and the scenario description."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import SpatialGrid

POTENTIAL_KINDS = ("flat", "harmonic", "morse", "tabulated")
RAMP_SHAPES = ("linear", "sine-squared")


class OutOfRangeError(ValueError):
    """Evaluation of a tabulated curve outside its node range."""


@dataclass(frozen=True)
class PotentialCurve:
    """Electronic potential V(R) in hartree.

    Use the ``flat``, ``harmonic``, ``morse`` and ``tabulated`` constructors
    rather than building instances directly.
    """

    kind: str
    params: dict = field(default_factory=dict)
    nodes: Optional[tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False, compare=False)
    _spline: Optional[CubicSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def flat(cls, offset: float = 0.0) -> PotentialCurve:
        return cls("flat", {"offset": float(offset)})

    @classmethod
    def harmonic(
        cls,
        r0: float,
        force_constant: float | None = None,
        *,
        omega: float | None = None,
        mass: float | None = None,
        offset: float = 0.0,
    ) -> PotentialCurve:
        if force_constant is None:
            if omega is None or mass is None:
                raise ValueError("harmonic curve needs force_constant or (omega, mass)")
            force_constant = mass * omega**2
        if force_constant <= 0:
            raise ValueError("force constant must be positive")
        return cls(
            "harmonic",
            {"force_constant": float(force_constant), "r0": float(r0), "offset": float(offset)},
        )

    @classmethod
    def morse(cls, D_e: float, a: float, r0: float, offset: float = 0.0) -> PotentialCurve:
        if D_e <= 0 or a <= 0:
            raise ValueError("Morse D_e and a must be positive")
        return cls(
            "morse", {"D_e": float(D_e), "a": float(a), "r0": float(r0), "offset": float(offset)}
        )

    @classmethod
    def tabulated(cls, r, v) -> PotentialCurve:
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 3:
            raise ValueError("tabulated curve needs matching 1-D arrays with >= 3 nodes")
        if not np.all(np.diff(r) > 0):
            raise ValueError("tabulated R samples must be strictly increasing")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("tabulated curve contains non-finite values")
        r.flags.writeable = False
        v.flags.writeable = False
        spline = CubicSpline(r, v, bc_type="natural", extrapolate=False)
        return cls("tabulated", {"n_nodes": int(r.size)}, (r, v), spline)

    def difference_profile(self, other: PotentialCurve, r) -> np.ndarray:
        """V_self(R) - V_other(R); the R-profile entering the skew information."""
        return evaluate_potential(self, r) - evaluate_potential(other, r)

    def describe(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.kind == "tabulated":
            out["r"] = self.nodes[0].tolist()
            out["v"] = self.nodes[1].tolist()
        return out


def load_tabulated(path) -> PotentialCurve:
    """Read a two-column ``R_bohr V_hartree`` text file ('#' starts a comment)."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two numeric columns, found {data.shape[1]}")
    return PotentialCurve.tabulated(data[:, 0], data[:, 1])


def evaluate_potential(p: PotentialCurve, r):
    """V(r) in hartree; scalar in, scalar out."""
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    prm = p.params
    if p.kind == "flat":
        v = np.full_like(r, prm["offset"])
    elif p.kind == "harmonic":
        v = 0.5 * prm["force_constant"] * (r - prm["r0"]) ** 2 + prm["offset"]
    elif p.kind == "morse":
        x = 1.0 - np.exp(-prm["a"] * (r - prm["r0"]))
        v = prm["D_e"] * x * x + prm["offset"]
    else:
        r_nodes, v_nodes = p.nodes
        if np.any(r < r_nodes[0]) or np.any(r > r_nodes[-1]):
            raise OutOfRangeError(
                f"tabulated curve defined on [{r_nodes[0]}, {r_nodes[-1]}], no extrapolation"
            )
        v = p._spline(r)
        # exact node reproduction
        hit = np.searchsorted(r_nodes, r)
        hit = np.clip(hit, 0, r_nodes.size - 1)
        on_node = r_nodes[hit] == r
        v = np.where(on_node, v_nodes[hit], v)
    return float(v) if scalar else v


@dataclass(frozen=True)
class PulseEnvelope:
    """Trapezoidal envelope e(t): ramp up, plateau at 1, ramp down."""

    t_start: float
    t_rise: float
    t_plateau: float
    t_fall: float
    shape: str = "sine-squared"

    def __post_init__(self):
        if self.shape not in RAMP_SHAPES:
            raise ValueError(f"envelope shape must be one of {RAMP_SHAPES}, got {self.shape!r}")
        for name in ("t_rise", "t_plateau", "t_fall"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def t_end(self) -> float:
        return self.t_start + self.t_rise + self.t_plateau + self.t_fall

    @property
    def plateau(self) -> tuple[float, float]:
        t1 = self.t_start + self.t_rise
        return t1, t1 + self.t_plateau

    def integral(self) -> float:
        return self.t_plateau + 0.5 * (self.t_rise + self.t_fall)


def _ramp(x, shape):
    if shape == "linear":
        return x
    return np.sin(0.5 * np.pi * x) ** 2


def envelope_value(env: PulseEnvelope | None, t):
    """e(t) in [0, 1]. ``env=None`` means a constant envelope of 1."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if env is None:
        out = np.ones_like(t)
        return float(out) if scalar else out
    t_up, t_down = env.plateau
    out = np.zeros_like(t)
    if env.t_rise > 0:
        m = (t > env.t_start) & (t < t_up)
        out[m] = _ramp((t[m] - env.t_start) / env.t_rise, env.shape)
    out[(t >= t_up) & (t <= t_down)] = 1.0
    if env.t_fall > 0:
        m = (t > t_down) & (t < env.t_end)
        out[m] = _ramp((env.t_end - t[m]) / env.t_fall, env.shape)
    return float(out) if scalar else out


@dataclass(frozen=True)
class CouplingSpec:
    """R-independent coupling W(t) = strength * e(t), strength in hartree."""

    strength: float
    envelope: Optional[PulseEnvelope] = None

    def value(self, t):
        return self.strength * envelope_value(self.envelope, t)


@dataclass(frozen=True)
class InitialState:
    """Initial packet and its channel.

    ``kind`` is ``"eigenstate"`` (vibrational level ``index`` of the curve
    named by ``potential``, defaulting to ``channel``) or ``"gaussian"``.
    With ``p_g`` set, the same packet is shared between both channels with
    populations (p_g, 1 - p_g); otherwise it is placed entirely in ``channel``.
    """

    channel: str = "e"
    kind: str = "eigenstate"
    index: int = 0
    potential: Optional[str] = None
    center: float = 0.0
    width: float = 1.0
    momentum: float = 0.0
    p_g: Optional[float] = None

    def __post_init__(self):
        if self.channel not in ("g", "e"):
            raise ValueError("initial channel must be 'g' or 'e'")
        if self.kind not in ("eigenstate", "gaussian"):
            raise ValueError("initial kind must be 'eigenstate' or 'gaussian'")
        if self.potential not in (None, "g", "e"):
            raise ValueError("initial potential must be 'g' or 'e'")
        if self.kind == "eigenstate" and self.index < 0:
            raise ValueError("eigenstate index must be >= 0")
        if self.kind == "gaussian" and self.width <= 0:
            raise ValueError("gaussian width must be positive")
        if self.p_g is not None and not 0.0 <= self.p_g <= 1.0:
            raise ValueError("p_g must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one propagation run, in atomic units."""

    name: str
    grid: SpatialGrid
    mass: float
    V_g: PotentialCurve
    V_e: PotentialCurve
    coupling: CouplingSpec
    initial_state: InitialState
    dt: float
    t_final: float
    sample_stride: int = 1
    eps_pop: float = 1e-6
    eps_overlap: float = 1e-6
    method: str = "split-operator"
    chebyshev_order: int = 0
    t_initial: float = 0.0
    report_intervals: tuple = ()
    units: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final > self.t_initial:
            raise ValueError("t_final must exceed t_initial")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise ValueError("sample_stride must be an integer >= 1")
        for name in ("eps_pop", "eps_overlap"):
            eps = getattr(self, name)
            if not 0 < eps <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if self.method not in ("split-operator", "chebyshev"):
            raise ValueError(f"unknown propagation method {self.method!r}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil((self.t_final - self.t_initial) / self.dt - 1e-9))

    def coupling_at(self, t):
        return self.coupling.value(t)

    def potentials_on_grid(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.grid.r
        return evaluate_potential(self.V_g, r), evaluate_potential(self.V_e, r)

    def with_coupling_scale(self, factor: float) -> ScenarioConfig:
        c = CouplingSpec(self.coupling.strength * factor, self.coupling.envelope)
        return replace(self, coupling=c, name=f"{self.name}-x{factor:g}")
