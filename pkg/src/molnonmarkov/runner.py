"""Scenario execution: propagate and evaluate all diagnostics along the way."""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import __version__
from .grid import TwoChannelState, WaveFunction, gaussian, vibrational_eigenstates
from .models import ScenarioConfig
from .nonmarkov import (
    CanonicalRates,
    GuardError,
    Guards,
    case_label,
    canonical_rates,
    decoherence_matrix,
    max_relative_rate_deviation,
    nm_sample,
    rate_sum_closed_form,
)
from .observables import correlation_scalars, reduced_density_from_arrays
from .propagator import Propagator, StepperSettings, derivatives_from_arrays

log = logging.getLogger(__name__)

COLUMNS = (
    "time", "P_g", "P_e", "re_overlap", "im_overlap", "dPg_dt", "abs_dov_dt",
    "gamma1", "gamma2", "gamma3", "rate_sum", "nm_factor", "f", "n_index", "case",
    "L", "S_vN", "C_l1", "IS_factor", "bloch_logderiv", "valid",
)
# columns left empty for guard-invalid samples
RATE_COLUMNS = ("gamma1", "gamma2", "gamma3", "rate_sum", "f", "n_index", "bloch_logderiv")
# in-memory extras, not part of trajectory.csv
EXTRA_COLUMNS = (
    "re_dov_dt", "im_dov_dt", "purity_gap", "coupling", "eig_rel_dev", "trace_dev",
    "potential_rate", "guard",
)


@dataclass(frozen=True)
class DiagnosticsSample:
    time: float
    P_g: float
    P_e: float
    re_overlap: float
    im_overlap: float
    dPg_dt: float
    abs_dov_dt: float
    gamma1: float
    gamma2: float
    gamma3: float
    rate_sum: float
    nm_factor: float
    f: float
    n_index: int
    case: str
    L: float
    S_vN: float
    C_l1: float
    IS_factor: float
    bloch_logderiv: float
    valid: bool
    extras: dict = field(default_factory=dict, compare=False)


class Trajectory:
    """Column store of diagnostics samples plus run metadata.

    Columns are numpy arrays reachable as attributes (``traj.P_g``);
    ``case`` is an array of str and ``valid`` is boolean.
    """

    def __init__(self, columns: dict, metadata: Optional[dict] = None, extras: Optional[dict] = None):
        self.columns = {k: np.asarray(columns[k]) for k in COLUMNS}
        self.columns["valid"] = self.columns["valid"].astype(bool)
        self.columns["case"] = self.columns["case"].astype(str)
        self.extras = {k: np.asarray(v) for k, v in (extras or {}).items()}
        self.metadata = dict(metadata or {})

    @classmethod
    def from_samples(cls, samples, metadata=None) -> Trajectory:
        samples = list(samples)
        cols = {}
        for name in COLUMNS:
            cols[name] = np.array([getattr(s, name) for s in samples]) if samples else np.array([])
        cols["case"] = np.array([s.case for s in samples], dtype=str) if samples else np.array([], dtype=str)
        keys = samples[0].extras.keys() if samples else ()
        extras = {k: np.array([s.extras[k] for s in samples]) for k in keys}
        return cls(cols, metadata, extras)

    def __len__(self) -> int:
        return int(self.columns["time"].size)

    def __getattr__(self, name):
        cols = self.__dict__.get("columns", {})
        if name in cols:
            return cols[name]
        extras = self.__dict__.get("extras", {})
        if name in extras:
            return extras[name]
        raise AttributeError(name)

    @property
    def overlap(self) -> np.ndarray:
        return self.columns["re_overlap"] + 1j * self.columns["im_overlap"]

    @property
    def doverlap_dt(self) -> np.ndarray:
        return self.extras["re_dov_dt"] + 1j * self.extras["im_dov_dt"]

    def sample(self, i: int) -> DiagnosticsSample:
        vals = {k: self.columns[k][i].item() for k in COLUMNS}
        vals["valid"] = bool(vals["valid"])
        vals["n_index"] = int(vals["n_index"]) if vals["valid"] else -1
        ex = {k: v[i].item() for k, v in self.extras.items()}
        return DiagnosticsSample(**vals, extras=ex)

    def window(self, t1: float, t2: float) -> Trajectory:
        m = (self.time >= t1) & (self.time <= t2)
        return Trajectory(
            {k: v[m] for k, v in self.columns.items()},
            self.metadata,
            {k: v[m] for k, v in self.extras.items()},
        )

    def every(self, n: int) -> Trajectory:
        """Sub-sampled copy keeping every n-th sample."""
        return Trajectory(
            {k: v[::n] for k, v in self.columns.items()},
            self.metadata,
            {k: v[::n] for k, v in self.extras.items()},
        )


@dataclass
class RunManifest:
    config: dict
    code_version: str = __version__
    started: str = ""
    finished: str = ""
    wall_seconds: float = 0.0
    n_samples: int = 0
    n_invalid: int = 0
    guard_counts: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def initial_state(config: ScenarioConfig) -> TwoChannelState:
    spec = config.initial_state
    grid = config.grid
    if spec.kind == "eigenstate":
        which = spec.potential or spec.channel
        curve = config.V_g if which == "g" else config.V_e
        _, phi = vibrational_eigenstates(curve, grid, config.mass, spec.index + 1)[spec.index]
    else:
        phi = gaussian(grid, spec.center, spec.width, spec.momentum)
    zero = WaveFunction(grid, np.zeros(grid.n_points))
    if spec.p_g is not None:
        g = phi * math.sqrt(spec.p_g)
        e = phi * math.sqrt(1.0 - spec.p_g)
        return TwoChannelState(g, e, config.t_initial)
    if spec.channel == "g":
        return TwoChannelState(phi, zero, config.t_initial)
    return TwoChannelState(zero, phi, config.t_initial)


def diagnose(t: float, g: np.ndarray, e: np.ndarray, config: ScenarioConfig,
             vg: np.ndarray, ve: np.ndarray, guards: Guards) -> DiagnosticsSample:
    """All per-sample diagnostics for the state (g, e) at time t."""
    dr = config.grid.dr
    rho = reduced_density_from_arrays(g, e, dr)
    w = config.coupling_at(t)
    deriv = derivatives_from_arrays(g, e, dr, vg, ve, w)
    dpg = deriv.dPg_dt
    dov = deriv.doverlap_dt
    sc = correlation_scalars(rho)
    nm_factor = -dpg * (rho.p_g - rho.p_e)
    c_abs = abs(rho.c)
    pot_rate = float(abs(np.vdot(g, (ve - vg) * e) * dr) / c_abs) if c_abs > 0 else math.nan
    try:
        rates = canonical_rates(rho, deriv, guards)
    except GuardError as err:
        rates = CanonicalRates.invalid(err.which)
    extras = {
        "re_dov_dt": dov.real,
        "im_dov_dt": dov.imag,
        "purity_gap": rho.purity_gap,
        "coupling": float(np.real(w)),
        "eig_rel_dev": math.nan,
        "trace_dev": math.nan,
        "potential_rate": pot_rate,
        "guard": rates.guard_report,
    }
    label = case_label(nm_factor, dpg, rho.p_g - rho.p_e)
    if rates.valid:
        D = decoherence_matrix(rho, deriv, guards)
        extras["eig_rel_dev"] = max_relative_rate_deviation(rates, D)
        extras["trace_dev"] = abs(D.trace - rate_sum_closed_form(rho, dpg))
        s = nm_sample(rates, nm_factor, dpg, rho.p_g - rho.p_e)
        g1, g2, g3 = rates.gamma1, rates.gamma2, rates.gamma3
        f, n_index, rate_sum, blog = s.f, s.n_index, s.rate_sum, s.bloch_log_derivative
    else:
        g1 = g2 = g3 = f = rate_sum = blog = math.nan
        n_index = -1
    return DiagnosticsSample(
        time=float(t), P_g=rho.p_g, P_e=rho.p_e, re_overlap=rho.c.real, im_overlap=rho.c.imag,
        dPg_dt=dpg, abs_dov_dt=abs(dov), gamma1=g1, gamma2=g2, gamma3=g3, rate_sum=rate_sum,
        nm_factor=nm_factor, f=f, n_index=n_index, case=label, L=sc.L, S_vN=sc.S_vN,
        C_l1=sc.C_l1, IS_factor=sc.IS_factor, bloch_logderiv=blog, valid=rates.valid,
        extras=extras,
    )


def run_scenario(config: ScenarioConfig, settings: Optional[StepperSettings] = None,
                 state0: Optional[TwoChannelState] = None, config_echo: Optional[dict] = None):
    """Propagate ``config`` to ``t_final`` and sample diagnostics every
    ``sample_stride`` steps. Returns (Trajectory, RunManifest)."""
    started = _time.strftime("%Y-%m-%dT%H:%M:%S")
    wall0 = _time.perf_counter()
    settings = settings or StepperSettings.from_scenario(config)
    prop = Propagator(config, settings)
    state = state0 if state0 is not None else initial_state(config)
    guards = Guards(config.eps_pop, config.eps_overlap)
    vg, ve = prop.vg, prop.ve
    samples = []

    def record(i, t, g, e):
        samples.append(diagnose(t, g, e, config, vg, ve, guards))

    n_steps = config.n_steps
    log.info("running %s: %d steps, stride %d", config.name, n_steps, config.sample_stride)
    prop.run(state, n_steps, record, config.sample_stride)
    traj = Trajectory.from_samples(samples, {
        "scenario": config.name, "dt": settings.dt, "method": settings.method,
        "sample_stride": config.sample_stride, "eps_pop": config.eps_pop,
        "eps_overlap": config.eps_overlap,
    })
    guard_counts: dict = {}
    for s in samples:
        if not s.valid:
            guard_counts[s.extras["guard"]] = guard_counts.get(s.extras["guard"], 0) + 1
    manifest = RunManifest(
        config=config_echo if config_echo is not None else {"name": config.name},
        started=started,
        finished=_time.strftime("%Y-%m-%dT%H:%M:%S"),
        wall_seconds=round(_time.perf_counter() - wall0, 3),
        n_samples=len(samples),
        n_invalid=sum(not s.valid for s in samples),
        guard_counts=guard_counts,
    )
    return traj, manifest
