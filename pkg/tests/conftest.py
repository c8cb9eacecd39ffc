import pytest

from molnonmarkov.config import build_config
from molnonmarkov.presets import LADDER, preset_config, preset_raw
from molnonmarkov.runner import run_scenario

TU = 520.0  # morse-pair time unit in atomic units


def scenario(name="rabi-flat", **overrides):
    """Preset config with dotted-path overrides given as keyword arguments
    (``coupling__strength=0.0`` sets ``coupling.strength``)."""
    return preset_config(name, {k.replace("__", "."): v for k, v in overrides.items()})


def raw_scenario(name="rabi-flat"):
    return preset_raw(name)


def build(raw):
    return build_config(raw)


@pytest.fixture(scope="session")
def ladder_runs():
    """Full-length runs of the morse-pair coupling ladder, shared by all tests."""
    return {name: run_scenario(preset_config(name))[0] for name in LADDER}


@pytest.fixture(scope="session")
def morse_pair_run(ladder_runs):
    return ladder_runs["morse-pair"]


@pytest.fixture(scope="session")
def identity_run():
    """morse-pair through the pulse and into the free evolution at a third of
    the default step, sampled on the default grid of times."""
    base = preset_config("morse-pair")
    cfg = preset_config("morse-pair", {
        "integrator.dt": base.dt / 3, "integrator.t_final": f"{260} tu",
        "integrator.sample_stride": 3,
    })
    return run_scenario(cfg)[0]


def synthetic_trajectory(time, **columns):
    """Trajectory with the given columns; the rest describe a fixed,
    guard-passing state (P_g = 0.75, c = 0.3) with zero rates."""
    import numpy as np

    from molnonmarkov.runner import COLUMNS, Trajectory

    t = np.asarray(time, dtype=float)
    defaults = {"P_g": 0.75, "P_e": 0.25, "re_overlap": 0.3, "n_index": 0, "valid": True,
                "case": "iv"}
    cols = {}
    for name in COLUMNS:
        value = columns.get(name, defaults.get(name, 0.0))
        cols[name] = np.broadcast_to(np.asarray(value), t.shape).copy()
    cols["time"] = t
    return Trajectory(cols)


@pytest.fixture(scope="session")
def oracle_results():
    from molnonmarkov.oracles import ORACLE_PRESETS, oracle_check

    return {name: oracle_check(name) for name in ORACLE_PRESETS}


@pytest.fixture(scope="session")
def displaced_run():
    return run_scenario(preset_config("displaced-harmonic"))[0]


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the end-of-run summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
