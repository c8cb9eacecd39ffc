import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from molnonmarkov.models import (
    CouplingSpec,
    OutOfRangeError,
    PotentialCurve,
    PulseEnvelope,
    envelope_value,
    evaluate_potential,
    load_tabulated,
)
from molnonmarkov.units import UnitError, convert_units, to_atomic


def test_flat_is_zero():
    assert evaluate_potential(PotentialCurve.flat(), 3.7) == 0.0


def test_morse_minimum():
    assert evaluate_potential(PotentialCurve.morse(0.01, 1.0, 5.0, offset=0.002), 5.0) == 0.002


def test_tabulated_reproduces_nodes():
    curve = PotentialCurve.tabulated([1.0, 2.0, 3.0], [0.5, 0.1, 0.4])
    assert evaluate_potential(curve, 2.0) == 0.1
    assert np.array_equal(evaluate_potential(curve, np.array([1.0, 3.0])), [0.5, 0.4])


def test_tabulated_refuses_extrapolation():
    curve = PotentialCurve.tabulated([1.0, 2.0, 3.0], [0.5, 0.1, 0.4])
    with pytest.raises(OutOfRangeError):
        evaluate_potential(curve, 3.5)


@pytest.mark.parametrize("r, v", [
    ([1.0, 3.0, 2.0], [0.0, 0.0, 0.0]),
    ([1.0, 2.0], [0.0, 0.0]),
    ([1.0, 2.0, 3.0], [0.0, np.nan, 0.0]),
])
def test_tabulated_validation(r, v):
    with pytest.raises(ValueError):
        PotentialCurve.tabulated(r, v)


def test_tabulated_file(tmp_path):
    p = tmp_path / "curve.dat"
    p.write_text("# R V\n1.0 0.5\n2.0 0.1\n3.0 0.4\n")
    assert evaluate_potential(load_tabulated(p), 1.0) == 0.5


def test_spline_error_is_fourth_order():
    morse = PotentialCurve.morse(0.01, 0.5, 6.0)
    r_fine = np.linspace(5.0, 12.0, 2001)
    exact = evaluate_potential(morse, r_fine)
    errors = []
    for n in (40, 80, 160):
        nodes = np.linspace(4.0, 13.0, n)
        curve = PotentialCurve.tabulated(nodes, evaluate_potential(morse, nodes))
        errors.append(np.max(np.abs(evaluate_potential(curve, r_fine) - exact)))
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    # halving the node spacing cuts the interior error by ~2^4
    assert all(r > 12 for r in ratios)


def test_harmonic_from_omega():
    c = PotentialCurve.harmonic(1.0, omega=0.01, mass=1000.0)
    assert c.params["force_constant"] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        PotentialCurve.harmonic(1.0)


ENV = PulseEnvelope(t_start=50.0, t_rise=50.0, t_plateau=95.0, t_fall=55.0)


def test_envelope_values():
    assert envelope_value(ENV, 10.0) == 0.0
    assert envelope_value(ENV, 140.0) == 1.0
    assert abs(envelope_value(ENV, 75.0) - 0.5) < 1e-12
    assert envelope_value(ENV, 260.0) == 0.0
    assert envelope_value(None, 1e9) == 1.0


def test_envelope_continuous_and_bounded():
    t = np.linspace(0, 300, 30001)
    e = envelope_value(ENV, t)
    assert e.min() >= 0.0 and e.max() <= 1.0
    assert np.max(np.abs(np.diff(e))) < 1e-3


@pytest.mark.parametrize("shape", ["linear", "sine-squared"])
def test_envelope_integral(shape):
    env = PulseEnvelope(10.0, 20.0, 30.0, 40.0, shape)
    t = np.linspace(0, 120, 240001)
    numeric = trapezoid(envelope_value(env, t), t)
    assert numeric == pytest.approx(30.0 + 0.5 * 20.0 + 0.5 * 40.0, abs=1e-6)
    assert env.integral() == pytest.approx(60.0, abs=1e-10)


def test_envelope_validation():
    with pytest.raises(ValueError):
        PulseEnvelope(0.0, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        PulseEnvelope(0.0, 1.0, 1.0, 1.0, shape="gaussian")


def test_coupling_is_strength_times_envelope():
    spec = CouplingSpec(2e-3, ENV)
    assert spec.value(75.0) == pytest.approx(1e-3)


def test_hartree_in_wavenumbers():
    assert convert_units(219474.6313632, "cm-1", "hartree") == pytest.approx(1.0, rel=1e-15)


def test_zero_converts_to_zero():
    for a, b in (("cm-1", "hartree"), ("ps", "au_time"), ("angstrom", "bohr"), ("amu", "me")):
        assert convert_units(0.0, a, b) == 0.0


def test_round_trip():
    x = convert_units(convert_units(3.29, "cm-1", "hartree"), "hartree", "cm-1")
    assert x == pytest.approx(3.29, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e6), st.sampled_from([("cm-1", "hartree"), ("ps", "au_time"),
                                              ("angstrom", "bohr"), ("amu", "me")]))
def test_round_trip_property(x, pair):
    a, b = pair
    assert convert_units(convert_units(x, a, b), b, a) == pytest.approx(x, rel=1e-12)


def test_known_time_and_mass_units():
    assert to_atomic(1.0, "ps") == pytest.approx(41341.373335, rel=1e-9)
    assert to_atomic(1.0, "amu") == pytest.approx(1822.888486209, rel=1e-12)


def test_incompatible_units():
    with pytest.raises(UnitError):
        convert_units(1.0, "ps", "hartree")
    with pytest.raises(UnitError):
        convert_units(1.0, "furlong", "bohr")
