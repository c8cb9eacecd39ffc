"""Time stepping of the coupled two-channel Schrodinger equation.

The Hamiltonian acting on (psi_g, psi_e) is

    [ T + V_g    W   ]
    [ W*       T + V_e ]

with W(t) = W_L e(t) independent of R. Units are atomic (hbar = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sp_fft
from scipy.special import jv

from .grid import (
    GridMismatchError,
    TwoChannelState,
    WaveFunction,
    kinetic_spectrum,
)
from .models import ScenarioConfig

STEP_NORM_TOL = 1e-8
MAX_PHASE_PER_STEP = 0.5


class StabilityError(RuntimeError):
    """Norm drift beyond tolerance in a single step."""


class StepSizeError(ValueError):
    """dt does not resolve the fastest energy scale on the grid."""


class EnergyBoundsError(RuntimeError):
    """A Ritz estimate of the spectrum falls outside the Chebyshev bounds."""


@dataclass(frozen=True)
class StepperSettings:
    method: str = "split-operator"
    dt: float = 1.0
    chebyshev_order: int = 0
    energy_bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.method not in ("split-operator", "chebyshev"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.dt == 0 or not math.isfinite(self.dt):
            raise ValueError("dt must be finite and non-zero")
        if self.method == "chebyshev" and self.chebyshev_order < 4:
            raise ValueError("chebyshev_order must be >= 4")

    @classmethod
    def from_scenario(cls, scenario: ScenarioConfig) -> StepperSettings:
        order = scenario.chebyshev_order
        if scenario.method == "chebyshev" and order < 4:
            lo, hi = spectral_bounds(scenario)
            order = default_chebyshev_order(0.5 * (hi - lo) * scenario.dt)
        return cls(scenario.method, scenario.dt, order)


@dataclass(frozen=True)
class DerivativePair:
    """A = i dP_g/dt and B = i d<psi_e|psi_g>/dt (hbar = 1)."""

    A: complex
    B: complex

    @property
    def dPg_dt(self) -> float:
        return float((self.A / 1j).real)

    @property
    def doverlap_dt(self) -> complex:
        """d<psi_g|psi_e>/dt."""
        return complex(1j * np.conj(self.B))


def spectral_bounds(scenario: ScenarioConfig) -> tuple[float, float]:
    """Conservative (E_min, E_max) of the grid Hamiltonian over the whole run."""
    vg, ve = scenario.potentials_on_grid()
    w = abs(scenario.coupling.strength)
    t_max = float(kinetic_spectrum(scenario.grid, scenario.mass).max())
    e_min = min(vg.min(), ve.min()) - w
    e_max = max(vg.max(), ve.max()) + w + t_max
    return float(e_min), float(e_max)


def fastest_scale(scenario: ScenarioConfig) -> float:
    """Kinetic cutoff plus potential range plus coupling, in hartree."""
    vg, ve = scenario.potentials_on_grid()
    t_max = float(kinetic_spectrum(scenario.grid, scenario.mass).max())
    v_all = np.concatenate([vg, ve])
    return t_max + float(v_all.max() - v_all.min()) + abs(scenario.coupling.strength)


def default_chebyshev_order(alpha: float) -> int:
    """Smallest order whose next Bessel coefficient is below 1e-16."""
    k = max(4, int(alpha) + 1)
    while abs(jv(k, alpha)) > 1e-16 or abs(jv(k + 1, alpha)) > 1e-16:
        k += 1
    return k


def _hamiltonian_arrays(g, e, t_k, vg, ve, w):
    hg = np.fft.ifft(t_k * np.fft.fft(g)) + vg * g + w * e
    he = np.fft.ifft(t_k * np.fft.fft(e)) + ve * e + np.conj(w) * g
    return hg, he


class Propagator:
    """Precomputed propagation kernel for one scenario.

    Works on raw complex arrays for speed; ``step`` below wraps it for
    :class:`TwoChannelState` values.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        settings: StepperSettings | None = None,
        mask: np.ndarray | None = None,
        check_step_size: bool = True,
    ):
        self.scenario = scenario
        self.settings = settings or StepperSettings.from_scenario(scenario)
        self.dt = self.settings.dt
        self.mask = None if mask is None else np.asarray(mask, dtype=float)
        split = self.settings.method == "split-operator"
        if check_step_size and split and abs(self.dt) * fastest_scale(scenario) > MAX_PHASE_PER_STEP:
            raise StepSizeError(
                f"dt={self.dt:g} with fastest scale {fastest_scale(scenario):.4g} Eh "
                f"exceeds dt*E_max <= {MAX_PHASE_PER_STEP}"
            )
        self.vg, self.ve = scenario.potentials_on_grid()
        self.t_k = kinetic_spectrum(scenario.grid, scenario.mass)
        self._mean = 0.5 * (self.vg + self.ve)
        self._half_gap = 0.5 * (self.vg - self.ve)
        self._kin_phase = np.exp(-1j * self.t_k * self.dt)
        if self.settings.method == "chebyshev":
            self._setup_chebyshev()
        self._bounds_checked = False
        self._factor_key = None

    # split operator -------------------------------------------------------
    def _potential_factors(self, w, tau):
        """Pointwise pieces of exp(-i M tau), M = mean*I + [[d, w], [w*, -d]].

        Cached on (w, tau): the coupling is piecewise constant over most runs.
        """
        key = (complex(w), float(tau))
        if self._factor_key != key:
            d = self._half_gap
            omega = np.sqrt(d * d + abs(w) ** 2)
            phase = np.exp(-1j * self._mean * tau)
            # sin(omega tau)/omega, finite at omega = 0
            sinc = tau * np.sinc(omega * tau / np.pi)
            a = phase * np.cos(omega * tau)
            self._factors = (a - 1j * phase * sinc * d, a + 1j * phase * sinc * d,
                             -1j * phase * sinc * w, -1j * phase * sinc * np.conj(w))
            self._factor_key = key
        return self._factors

    def _potential_half_step(self, g, e, w, tau):
        gg, ee, ge, eg = self._potential_factors(w, tau)
        return gg * g + ge * e, eg * g + ee * e

    def _split_step(self, g, e, t):
        w = self.scenario.coupling_at(t + 0.5 * self.dt)
        half = 0.5 * self.dt
        g, e = self._potential_half_step(g, e, w, half)
        both = sp_fft.ifft(self._kin_phase * sp_fft.fft(np.stack((g, e)), axis=-1), axis=-1)
        return self._potential_half_step(both[0], both[1], w, half)

    # chebyshev ------------------------------------------------------------
    def _setup_chebyshev(self):
        bounds = self.settings.energy_bounds or spectral_bounds(self.scenario)
        e_min, e_max = bounds
        if not e_max > e_min:
            raise ValueError("energy_bounds must satisfy E_min < E_max")
        self._e_mid = 0.5 * (e_max + e_min)
        self._e_half = 0.5 * (e_max - e_min)
        self._bounds = (e_min, e_max)
        alpha = self._e_half * self.dt
        order = self.settings.chebyshev_order
        k = np.arange(order + 1)
        coeff = (2.0 * (-1j) ** k * jv(k, abs(alpha))).astype(complex)
        if alpha < 0:
            coeff = coeff * (-1.0) ** k
        coeff[0] *= 0.5
        self._cheb_coeff = coeff
        self._cheb_phase = np.exp(-1j * self._e_mid * self.dt)

    def ritz_extremes(self, g, e, t, n_iter: int = 12) -> tuple[float, float]:
        """Extreme Ritz values of H(t) from a short Lanczos run started at (g, e)."""
        w = self.scenario.coupling_at(t)
        dr = self.scenario.grid.dr
        v = np.concatenate([g, e])
        nrm = np.sqrt(np.vdot(v, v).real * dr)
        if nrm == 0:
            v = np.ones_like(v)
            nrm = np.sqrt(np.vdot(v, v).real * dr)
        v = v / nrm
        n = g.size
        basis = [v]
        alphas, betas = [], []
        prev = np.zeros_like(v)
        beta = 0.0
        for _ in range(n_iter):
            hg, he = _hamiltonian_arrays(v[:n], v[n:], self.t_k, self.vg, self.ve, w)
            hv = np.concatenate([hg, he])
            a = np.vdot(v, hv).real * dr
            hv = hv - a * v - beta * prev
            for b in basis:  # full reorthogonalisation, n_iter is tiny
                hv = hv - np.vdot(b, hv) * dr * b
            alphas.append(a)
            beta = np.sqrt(np.vdot(hv, hv).real * dr)
            if beta < 1e-14:
                break
            betas.append(beta)
            prev, v = v, hv / beta
            basis.append(v)
        m = len(alphas)
        tri = np.diag(alphas) + np.diag(betas[: m - 1], 1) + np.diag(betas[: m - 1], -1)
        ritz = np.linalg.eigvalsh(tri)
        return float(ritz[0]), float(ritz[-1])

    def _chebyshev_step(self, g, e, t):
        if not self._bounds_checked:
            lo, hi = self.ritz_extremes(g, e, t)
            e_min, e_max = self._bounds
            if lo < e_min or hi > e_max:
                raise EnergyBoundsError(
                    f"Ritz estimate [{lo:.6g}, {hi:.6g}] outside bounds [{e_min:.6g}, {e_max:.6g}]"
                )
            self._bounds_checked = True
        w = self.scenario.coupling_at(t + 0.5 * self.dt)
        vg = (self.vg - self._e_mid) / self._e_half
        ve = (self.ve - self._e_mid) / self._e_half
        tk = self.t_k / self._e_half
        ws = w / self._e_half

        def hn(x, y):
            return _hamiltonian_arrays(x, y, tk, vg, ve, ws)

        c = self._cheb_coeff
        p0g, p0e = g, e
        p1g, p1e = hn(g, e)
        acc_g = c[0] * p0g + c[1] * p1g
        acc_e = c[0] * p0e + c[1] * p1e
        for k in range(2, c.size):
            hg, he = hn(p1g, p1e)
            p2g = 2.0 * hg - p0g
            p2e = 2.0 * he - p0e
            acc_g += c[k] * p2g
            acc_e += c[k] * p2e
            p0g, p0e, p1g, p1e = p1g, p1e, p2g, p2e
        return self._cheb_phase * acc_g, self._cheb_phase * acc_e

    # public ---------------------------------------------------------------
    def advance(self, g, e, t):
        """One step from time t; returns new (g, e) arrays."""
        dr = self.scenario.grid.dr
        n_before = (np.vdot(g, g).real + np.vdot(e, e).real) * dr
        if self.settings.method == "split-operator":
            g, e = self._split_step(g, e, t)
        else:
            g, e = self._chebyshev_step(g, e, t)
        if self.mask is not None:
            return g * self.mask, e * self.mask
        n_after = (np.vdot(g, g).real + np.vdot(e, e).real) * dr
        if abs(n_after - n_before) > STEP_NORM_TOL:
            raise StabilityError(
                f"norm changed by {n_after - n_before:.3e} in one step at t={t:g}"
            )
        return g, e

    def run(
        self,
        state: TwoChannelState,
        n_steps: int,
        callback: Callable[[int, float, np.ndarray, np.ndarray], None] | None = None,
        stride: int = 1,
    ) -> TwoChannelState:
        """Advance ``n_steps``; ``callback(i, t, g, e)`` fires every ``stride`` steps
        (including step 0)."""
        g = np.array(state.psi_g.amplitudes)
        e = np.array(state.psi_e.amplitudes)
        t0 = state.time
        if callback is not None:
            callback(0, t0, g, e)
        for i in range(1, n_steps + 1):
            g, e = self.advance(g, e, t0 + (i - 1) * self.dt)
            if callback is not None and i % stride == 0:
                callback(i, t0 + i * self.dt, g, e)
        return TwoChannelState.from_arrays(state.grid, g, e, t0 + n_steps * self.dt)


def _check_grid(state: TwoChannelState, scenario: ScenarioConfig) -> None:
    if state.grid != scenario.grid:
        raise GridMismatchError("state is not defined on the scenario grid")


def apply_hamiltonian(state: TwoChannelState, scenario: ScenarioConfig, t: float) -> TwoChannelState:
    """H(t) applied to the two-channel state (result carries the same time stamp)."""
    _check_grid(state, scenario)
    vg, ve = scenario.potentials_on_grid()
    t_k = kinetic_spectrum(scenario.grid, scenario.mass)
    w = scenario.coupling_at(t)
    hg, he = _hamiltonian_arrays(state.psi_g.amplitudes, state.psi_e.amplitudes, t_k, vg, ve, w)
    return TwoChannelState.from_arrays(state.grid, hg, he, state.time)


def step(
    state: TwoChannelState, scenario: ScenarioConfig, settings: StepperSettings | None = None
) -> TwoChannelState:
    """Advance ``state`` by one time step ``settings.dt``."""
    _check_grid(state, scenario)
    prop = Propagator(scenario, settings)
    return prop.run(state, 1)


def derivatives_from_arrays(g, e, dr, vg, ve, w) -> DerivativePair:
    """A(t), B(t) from the instantaneous wave functions (kinetic terms cancel)."""
    ov_ge = np.vdot(g, e) * dr  # <psi_g|psi_e>
    dpg = 2.0 * (w * ov_ge).imag
    b = (
        np.vdot(e, (vg - ve) * g) * dr
        + w * np.vdot(e, e).real * dr
        - w * np.vdot(g, g).real * dr
    )
    return DerivativePair(1j * dpg, complex(b))


def compute_derivatives(state: TwoChannelState, scenario: ScenarioConfig, t: float) -> DerivativePair:
    _check_grid(state, scenario)
    vg, ve = scenario.potentials_on_grid()
    return derivatives_from_arrays(
        state.psi_g.amplitudes, state.psi_e.amplitudes, scenario.grid.dr, vg, ve,
        scenario.coupling_at(t),
    )
