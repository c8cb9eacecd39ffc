import math

import numpy as np
import pytest

from conftest import TU, scenario
from molnonmarkov.differences import central_difference
from molnonmarkov.grid import TwoChannelState, WaveFunction, gaussian
from molnonmarkov.observables import reduced_density
from molnonmarkov.propagator import (
    DerivativePair,
    Propagator,
    StepSizeError,
    StepperSettings,
    apply_hamiltonian,
    compute_derivatives,
    step,
)
from molnonmarkov.runner import initial_state, run_scenario


def _random_state(grid, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    e = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    nrm = math.sqrt((np.vdot(g, g).real + np.vdot(e, e).real) * grid.dr)
    return TwoChannelState.from_arrays(grid, g / nrm, e / nrm)


def test_hamiltonian_kills_zero_momentum_without_coupling():
    cfg = scenario("rabi-flat", coupling__strength=0.0)
    flat = WaveFunction(cfg.grid, np.ones(cfg.grid.n_points))
    out = apply_hamiltonian(TwoChannelState(flat, flat), cfg, 0.0)
    assert np.max(np.abs(out.psi_g.amplitudes)) < 1e-12
    assert np.max(np.abs(out.psi_e.amplitudes)) < 1e-12


def test_decoupled_channels_stay_empty():
    cfg = scenario("morse-pair", coupling__strength=0.0)
    state = initial_state(scenario("morse-pair", initial_state__channel="g"))
    out = apply_hamiltonian(state, cfg, 100 * TU)
    assert np.all(out.psi_e.amplitudes == 0)


@pytest.mark.parametrize("seed", range(5))
def test_energy_expectation_is_real(seed):
    cfg = scenario("morse-pair")
    state = _random_state(cfg.grid, seed)
    h = apply_hamiltonian(state, cfg, 150 * TU)
    energy = (np.vdot(state.psi_g.amplitudes, h.psi_g.amplitudes)
              + np.vdot(state.psi_e.amplitudes, h.psi_e.amplitudes)) * cfg.grid.dr
    assert abs(energy.imag) <= 1e-10 * max(1.0, abs(energy.real))


def test_rabi_quarter_period():
    W = 1e-3
    t_target = math.pi / (4 * W)
    cfg = scenario("rabi-flat", integrator__dt=t_target / 500, integrator__t_final=t_target)
    traj, _ = run_scenario(cfg)
    assert traj.time[-1] == pytest.approx(t_target)
    assert abs(traj.P_e[-1] - math.cos(W * t_target) ** 2) < 1e-8


def test_single_step_is_unitary():
    cfg = scenario("morse-pair")
    state = _random_state(cfg.grid, 7)
    out = step(state, cfg)
    assert abs(out.norm2() - 1.0) <= 1e-10


def test_step_size_guard():
    cfg = scenario("morse-pair")
    with pytest.raises(StepSizeError):
        Propagator(cfg, StepperSettings(dt=cfg.dt * 50))


def test_settings_validation():
    with pytest.raises(ValueError):
        StepperSettings(dt=0.0)
    with pytest.raises(ValueError):
        StepperSettings(method="chebyshev", dt=1.0, chebyshev_order=2)
    with pytest.raises(ValueError):
        StepperSettings(method="leapfrog")


def test_derivatives_without_coupling():
    cfg = scenario("morse-pair", coupling__strength=0.0)
    state = _random_state(cfg.grid, 3)
    d = compute_derivatives(state, cfg, 0.0)
    vg, ve = cfg.potentials_on_grid()
    expected = np.vdot(state.psi_e.amplitudes, (vg - ve) * state.psi_g.amplitudes) * cfg.grid.dr
    assert d.A == 0
    assert abs(d.B - expected) <= 1e-14 * abs(expected)


def test_two_level_population_rate():
    cfg = scenario("rabi-flat")
    phi = gaussian(cfg.grid, 0.0, 2.0)
    cg, ce = 0.6 * np.exp(0.3j), 0.8 * np.exp(-1.1j)
    state = TwoChannelState(phi * cg, phi * ce)
    d = compute_derivatives(state, cfg, 0.0)
    W = cfg.coupling.strength
    assert abs(d.dPg_dt - 2 * W * (np.conj(cg) * ce).imag) < 1e-10


def test_derivative_pair_conventions():
    d = DerivativePair(A=0.25j, B=1.0 + 2.0j)
    assert d.dPg_dt == 0.25
    assert d.doverlap_dt == 1j * (1.0 - 2.0j)


@pytest.fixture(scope="module")
def plateau_window():
    base = scenario("morse-pair")
    cfg = scenario("morse-pair", integrator__dt=base.dt / 4,
                   integrator__t_initial="100 tu", integrator__t_final="112 tu")
    return run_scenario(cfg)[0]


def test_derivatives_match_finite_differences(plateau_window):
    tr = plateau_window
    t = tr.time
    inner = np.zeros(t.size, bool)
    inner[3:-3] = True
    for analytic, series in ((tr.dPg_dt, tr.P_g), (tr.doverlap_dt, tr.overlap)):
        fd = central_difference(t, series, 6)
        # "not near zero": above 1% of the largest rate in the window
        m = inner & (np.abs(analytic) > 1e-2 * np.abs(analytic).max())
        rel = np.abs(fd - analytic)[m] / np.abs(analytic)[m]
        assert rel.max() <= 1e-5


def test_time_reversal_with_frozen_envelope():
    cfg = scenario("morse-pair", coupling__envelope="constant", coupling__strength=1e-4)
    rng_state = _random_state(cfg.grid, 11)
    g0 = np.array(rng_state.psi_g.amplitudes)
    e0 = np.array(rng_state.psi_e.amplitudes)
    fwd = Propagator(cfg, StepperSettings(dt=cfg.dt))
    back = Propagator(cfg, StepperSettings(dt=-cfg.dt))
    g, e = fwd.advance(g0, e0, 0.0)
    g, e = back.advance(g, e, cfg.dt)
    err = math.sqrt((np.sum(np.abs(g - g0) ** 2) + np.sum(np.abs(e - e0) ** 2)) * cfg.grid.dr)
    assert err <= 1e-9


def test_split_operator_matches_chebyshev():
    kw = dict(integrator__t_initial="100 tu", integrator__t_final="104 tu")
    split = scenario("morse-pair", **kw)
    cheb = scenario("morse-pair", integrator__method="chebyshev", **kw)
    a, _ = run_scenario(split)
    b, _ = run_scenario(cheb)
    assert np.max(np.abs(a.P_g - b.P_g)) <= 1e-6


def test_chebyshev_oracle():
    cfg = scenario("rabi-flat", integrator__method="chebyshev", integrator__dt=50.0,
                   integrator__t_final=3000.0, integrator__sample_stride=1)
    traj, _ = run_scenario(cfg)
    W = cfg.coupling.strength
    assert np.max(np.abs(traj.P_e - np.cos(W * traj.time) ** 2)) < 1e-9


@pytest.mark.slow
def test_norm_conserved_over_full_run(morse_pair_run):
    assert np.max(np.abs(morse_pair_run.P_g + morse_pair_run.P_e - 1.0)) <= 1e-8
