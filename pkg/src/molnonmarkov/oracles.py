"""Closed-form reference dynamics for end-to-end validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORACLE_KINDS = ("rabi_flat", "free_gaussian", "displaced_harmonic")


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle {self.kind!r}")
        for key, value in self.params.items():
            if key in ("W_L", "omega", "mass", "sigma", "width") and not value > 0:
                raise ValueError(f"oracle parameter {key} must be positive")


def rabi_reference(W_L: float, t):
    """Resonant two-level solution starting in |e>, flat equal potentials.

    Returns (P_g, P_e, c) with c = <psi_g|psi_e> for a unit-norm spatial
    profile shared by both channels.
    """
    t = np.asarray(t, dtype=float)
    a_e = np.cos(W_L * t)
    a_g = -1j * np.sin(W_L * t)
    return np.abs(a_g) ** 2, np.abs(a_e) ** 2, np.conj(a_g) * a_e


def free_gaussian_width(sigma: float, mass: float, t):
    """Position spread of a free Gaussian that starts with spread ``sigma``."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(sigma**2 + (t / (2.0 * mass * sigma)) ** 2)


def coherent_amplitude_sq(omega: float, d0: float, mass: float) -> float:
    """|alpha_0|^2 = m omega d0^2 / 2 for a packet displaced by d0."""
    return 0.5 * mass * omega * d0**2


def displaced_harmonic_overlap(omega: float, d0: float, mass: float, t, energy_offset: float = 0.0):
    """<psi_g|psi_e>(t) for unit-norm packets, W = 0.

    psi_g is the ground state of V_g = m omega^2 (R - R0)^2 / 2 (stationary up
    to its phase); psi_e starts as the same Gaussian but evolves in
    V_e = m omega^2 (R - R0 - d0)^2 / 2 + energy_offset. The magnitude is
    exp[-(m omega d0^2 / 2)(1 - cos omega t)].
    """
    t = np.asarray(t, dtype=float)
    a2 = coherent_amplitude_sq(omega, d0, mass)
    return np.exp(-1j * energy_offset * t) * np.exp(-a2 * (1.0 - np.exp(-1j * omega * t)))


def displaced_harmonic_f(omega: float, d0: float, mass: float, t, energy_offset: float = 0.0):
    """|d c/dt| / |c| for the displaced-harmonic overlap."""
    t = np.asarray(t, dtype=float)
    a2 = coherent_amplitude_sq(omega, d0, mass)
    return np.abs(energy_offset + omega * a2 * np.exp(-1j * omega * t))


# ---------------------------------------------------------------------------
# end-to-end checks against the shipped oracle presets

ORACLE_PRESETS = {
    "rabi_flat": "rabi-flat",
    "free_gaussian": "free-gaussian",
    "displaced_harmonic": "displaced-harmonic",
}


@dataclass(frozen=True)
class OracleCheck:
    name: str
    errors: dict  # metric -> observed value
    limits: dict  # metric -> tolerance

    @property
    def passed(self) -> bool:
        return all(self.errors[k] <= self.limits[k] for k in self.limits)

    def lines(self) -> list:
        return [
            f"{self.name} {k}: {self.errors[k]:.3e} (limit {self.limits[k]:.0e}) "
            f"{'ok' if self.errors[k] <= self.limits[k] else 'FAIL'}"
            for k in self.limits
        ]


def _rabi_check(config, traj) -> OracleCheck:
    W = config.coupling.strength
    _, pe, _ = rabi_reference(W, traj.time)
    valid = traj.valid
    g3 = np.abs(traj.gamma3[valid]) if valid.any() else np.zeros(1)
    return OracleCheck(
        "rabi_flat",
        {"P_e": float(np.max(np.abs(traj.P_e - pe))), "L": float(np.max(traj.L)),
         "gamma3_T": float(np.max(g3) * (config.t_final - config.t_initial))},
        {"P_e": 1e-6, "L": 1e-9, "gamma3_T": 1e-9},
    )


def _displaced_check(config, traj) -> OracleCheck:
    from .nonmarkov import after_pulse_f

    g, e = config.V_g.params, config.V_e.params
    omega = float(np.sqrt(g["force_constant"] / config.mass))
    d0 = e["r0"] - g["r0"]
    p_g = config.initial_state.p_g
    # the frozen ground state picks up the zero-point phase of V_g, which
    # cancels against the same term in V_e
    ref = np.sqrt(p_g * (1 - p_g)) * displaced_harmonic_overlap(
        omega, d0, config.mass, traj.time, e["offset"] - g["offset"])
    c = traj.overlap
    from_potentials = traj.potential_rate
    from_overlap = after_pulse_f(traj.time, c, config.eps_overlap).f
    inner = slice(2, -2)
    rel = np.abs(from_potentials[inner] - from_overlap[inner]) / np.abs(from_potentials[inner])
    return OracleCheck(
        "displaced_harmonic",
        {"abs_overlap": float(np.max(np.abs(np.abs(c) - np.abs(ref)))),
         "overlap": float(np.max(np.abs(c - ref))),
         "after_pulse_rate_rel": float(np.max(rel))},
        {"abs_overlap": 1e-6, "overlap": 1e-6, "after_pulse_rate_rel": 1e-5},
    )


def _free_gaussian_check(config) -> OracleCheck:
    from .propagator import Propagator
    from .runner import initial_state

    r = config.grid.r
    dr = config.grid.dr
    times, widths = [], []

    def spread(i, t, g, e):
        rho = np.abs(e) ** 2
        n = rho.sum() * dr
        mean = (r * rho).sum() * dr / n
        times.append(t)
        widths.append(np.sqrt(((r - mean) ** 2 * rho).sum() * dr / n))

    Propagator(config).run(initial_state(config), config.n_steps, spread, config.sample_stride)
    ref = free_gaussian_width(config.initial_state.width, config.mass, np.array(times))
    return OracleCheck(
        "free_gaussian",
        {"width_rel": float(np.max(np.abs(np.array(widths) - ref) / ref))},
        {"width_rel": 1e-6},
    )


def oracle_check(name: str) -> OracleCheck:
    """Run the preset behind oracle ``name`` and compare with its closed form."""
    from .presets import preset_config
    from .runner import run_scenario

    key = name.replace("-", "_")
    if key not in ORACLE_PRESETS:
        raise ValueError(f"unknown oracle {name!r}; choose from {sorted(ORACLE_PRESETS)}")
    config = preset_config(ORACLE_PRESETS[key])
    if key == "free_gaussian":
        return _free_gaussian_check(config)
    traj, _ = run_scenario(config)
    if key == "rabi_flat":
        return _rabi_check(config, traj)
    return _displaced_check(config, traj)
