import json
import math
from pathlib import Path

import numpy as np
import pytest

from conftest import TU, scenario, synthetic_trajectory
from molnonmarkov.report import (
    SpanError,
    emit_outputs,
    interval_report,
    intervals_csv_text,
    read_trajectory_csv,
    trajectory_csv_text,
    verify_manifest,
)
from molnonmarkov.runner import COLUMNS, run_scenario

GOLDEN = Path(__file__).parent / "data" / "trajectory_header.csv"


@pytest.fixture(scope="module")
def short_run():
    cfg = scenario("morse-pair", integrator__t_final="70 tu", integrator__sample_stride=16)
    return cfg, *run_scenario(cfg)


def test_header_matches_golden_file(short_run):
    _, tr, _ = short_run
    assert trajectory_csv_text(tr).splitlines(keepends=True)[0] == GOLDEN.read_text()


def test_row_count():
    tr = synthetic_trajectory([0.0, 1.0, 2.0])
    assert len(trajectory_csv_text(tr).splitlines()) == 4


def test_number_format():
    tr = synthetic_trajectory([0.0, 1.0], f=[-0.0, 1 / 3], valid=[True, False], case=["iv", "i"])
    rows = [r.split(",") for r in trajectory_csv_text(tr).splitlines()[1:]]
    col = dict(zip(COLUMNS, zip(*rows)))
    assert col["f"] == ("0.0000000000000000e+00", "")
    assert col["valid"] == ("1", "0")
    assert col["case"] == ("iv", "i")
    assert col["n_index"] == ("0", "")
    assert col["P_g"][0] == "7.5000000000000000e-01"
    assert "nan" not in trajectory_csv_text(tr).lower()


def test_csv_round_trip(short_run, tmp_path):
    _, tr, _ = short_run
    p = tmp_path / "t.csv"
    p.write_text(trajectory_csv_text(tr))
    back = read_trajectory_csv(p)
    for k in COLUMNS:
        a, b = tr.columns[k], back.columns[k]
        if a.dtype.kind in "US b":
            assert (a == b).all(), k
        else:
            assert np.array_equal(a, b, equal_nan=True), k


def test_interval_report_additivity(short_run):
    _, tr, _ = short_run
    whole = interval_report(tr, [0.0, 70 * TU]).rows[0]
    parts = interval_report(tr, [0.0, 33.3 * TU, 70 * TU]).rows
    assert parts[0].F + parts[1].F == pytest.approx(whole.F, abs=1e-12)
    assert parts[0].guard_gap + parts[1].guard_gap == pytest.approx(whole.guard_gap, abs=1e-9)


def test_interval_report_zero_rate():
    t = np.linspace(0.0, 5.0, 11)
    row = interval_report(synthetic_trajectory(t, f=0.0), [0.0, 5.0]).rows[0]
    assert row.F == 0.0 and row.bloch_ratio == 1.0 and row.guard_gap == 0.0


def test_interval_report_span_errors():
    tr = synthetic_trajectory(np.linspace(0.0, 5.0, 11))
    for bounds in ([0.0], [0.0, 3.0, 2.0], [-1.0, 5.0], [0.0, 6.0]):
        with pytest.raises(SpanError):
            interval_report(tr, bounds)


def test_gapped_interval_has_blank_bloch_ratio():
    t = np.linspace(0.0, 10.0, 11)
    valid = np.ones(11, bool)
    valid[3:6] = False
    row = interval_report(synthetic_trajectory(t, valid=valid), [0.0, 10.0]).rows[0]
    assert math.isnan(row.bloch_ratio)
    assert intervals_csv_text(interval_report(synthetic_trajectory(t, valid=valid), [0, 10])) \
        .splitlines()[1].split(",")[4] == ""


def test_emit_outputs_and_manifest(short_run, tmp_path):
    cfg, tr, manifest = short_run
    rep = interval_report(tr, [0.0, 50 * TU, 70 * TU])
    data = emit_outputs(tr, rep, tmp_path, manifest, plot_data=True)
    names = set(data["outputs"])
    assert {"trajectory.csv", "intervals.csv", "plot_data/f_f.csv", "plot_data/a_P_g.csv"} <= names
    assert all(verify_manifest(tmp_path).values())
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["n_samples"] == len(tr)
    (tmp_path / "intervals.csv").write_text("tampered\n")
    assert verify_manifest(tmp_path)["intervals.csv"] is False
    series = (tmp_path / "plot_data" / "e_half_C_l1.csv").read_text().splitlines()
    t1, y1 = map(float, series[1].split(","))
    assert y1 == pytest.approx(0.5 * tr.C_l1[0], rel=1e-15)


def test_empty_trajectory(tmp_path):
    tr = synthetic_trajectory([])
    data = emit_outputs(tr, None, tmp_path)
    assert (tmp_path / "trajectory.csv").read_text() == GOLDEN.read_text()
    assert data["n_samples"] == 0 and data["note"] == "zero samples"


def test_render_panels(short_run, tmp_path):
    pytest.importorskip("matplotlib")
    _, tr, _ = short_run
    data = emit_outputs(tr, None, tmp_path, render=True, time_unit=(TU, "tu"))
    svgs = sorted(k for k in data["outputs"] if k.endswith(".svg"))
    assert svgs == [f"plot_data/panel_{k}.svg" for k in "abcdef"]


def test_repeat_runs_byte_identical(short_run, tmp_path):
    cfg, tr, _ = short_run
    again, _ = run_scenario(cfg)
    emit_outputs(tr, None, tmp_path / "a")
    emit_outputs(again, None, tmp_path / "b")
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
