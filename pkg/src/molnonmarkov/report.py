"""Interval summaries and on-disk outputs of a run.

Numbers are written in scientific notation with 17 significant digits.
NaN is never written: guard-invalid samples carry ``valid = 0`` and empty
rate fields.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .nonmarkov import GapError, IntervalError, bloch_volume_ratio, total_F_with_gaps
from .runner import COLUMNS, RATE_COLUMNS, RunManifest, Trajectory

INT_COLUMNS = ("n_index",)
TEXT_COLUMNS = ("case",)
FLAG_COLUMNS = ("valid",)

INTERVAL_COLUMNS = ("t1", "t2", "F", "mean_n_index", "bloch_ratio", "guard_gap")

# two-column plot series: (file stem, column)
PLOT_SERIES = (
    ("a_P_g", "P_g"),
    ("a_P_e", "P_e"),
    ("b_nm_factor", "nm_factor"),
    ("c_L", "L"),
    ("c_S_vN", "S_vN"),
    ("d_IS_factor", "IS_factor"),
    ("e_half_C_l1", "C_l1"),
    ("f_f", "f"),
)
PANELS = {
    "a": ("populations", ("P_g", "P_e")),
    "b": ("d(P_g P_e)/dt", ("nm_factor",)),
    "c": ("entanglement", ("L", "S_vN")),
    "d": ("skew information factor", ("IS_factor",)),
    "e": ("C_l1 / 2", ("C_l1",)),
    "f": ("non-Markovianity f(t)", ("f",)),
}


class SpanError(ValueError):
    """Report boundaries unsorted or outside the trajectory span."""


@dataclass(frozen=True)
class IntervalRow:
    t1: float
    t2: float
    F: float
    mean_n_index: float
    bloch_ratio: float  # nan when guard gaps make the ratio undefined
    guard_gap: float


@dataclass(frozen=True)
class IntervalReport:
    rows: tuple

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def interval_report(trajectory: Trajectory, boundaries: Sequence[float]) -> IntervalReport:
    """F, mean n_index and Bloch-volume ratio over adjacent intervals.

    ``boundaries`` b0 < b1 < ... < bk give the k intervals [b_i, b_{i+1}].
    """
    b = [float(x) for x in boundaries]
    if len(b) < 2:
        raise SpanError("need at least two boundaries")
    if any(y <= x for x, y in zip(b, b[1:])):
        raise SpanError(f"boundaries must be strictly increasing: {b}")
    t = trajectory.time
    if t.size < 2:
        raise SpanError("trajectory has fewer than two samples")
    tol = 1e-9 * max(1.0, abs(t[-1] - t[0]))
    if b[0] < t[0] - tol or b[-1] > t[-1] + tol:
        raise SpanError(f"boundaries [{b[0]}, {b[-1]}] outside span [{t[0]}, {t[-1]}]")
    rows = []
    for t1, t2 in zip(b, b[1:]):
        try:
            F, gap = total_F_with_gaps(trajectory, t1, t2)
        except IntervalError as err:
            raise SpanError(str(err)) from None
        m = (t >= t1 - tol) & (t <= t2 + tol) & trajectory.valid
        mean_n = float(np.mean(trajectory.n_index[m])) if m.any() else math.nan
        try:
            ratio = bloch_volume_ratio(trajectory, t1, t2)
        except (GapError, OverflowError):
            ratio = math.nan
        rows.append(IntervalRow(t1, t2, F, mean_n, ratio, gap))
    return IntervalReport(tuple(rows))


# ---------------------------------------------------------------------------
# CSV


def _fmt(x) -> str:
    x = float(x) + 0.0  # no negative zero
    return "" if not math.isfinite(x) else format(x, ".16e")


def _cell(name: str, value, valid: bool) -> str:
    if name in RATE_COLUMNS and not valid:
        return ""
    if name in TEXT_COLUMNS:
        return str(value)
    if name in FLAG_COLUMNS:
        return "1" if value else "0"
    if name in INT_COLUMNS:
        return str(int(value))
    return _fmt(value)


def trajectory_csv_text(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    cols = [trajectory.columns[k] for k in COLUMNS]
    valid = trajectory.valid
    for i in range(len(trajectory)):
        w.writerow([_cell(k, c[i], bool(valid[i])) for k, c in zip(COLUMNS, cols)])
    return buf.getvalue()


def read_trajectory_csv(path) -> Trajectory:
    """Parse a trajectory.csv back into a Trajectory (empty fields become NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(reader)
    cols = {}
    for j, name in enumerate(COLUMNS):
        raw = [r[j] for r in rows]
        if name in TEXT_COLUMNS:
            cols[name] = np.array(raw, dtype=str)
        elif name in FLAG_COLUMNS:
            cols[name] = np.array([v == "1" for v in raw], dtype=bool)
        elif name in INT_COLUMNS:
            cols[name] = np.array([int(v) if v else -1 for v in raw], dtype=int)
        else:
            cols[name] = np.array([float(v) if v else math.nan for v in raw], dtype=float)
    return Trajectory(cols)


def intervals_csv_text(report: IntervalReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INTERVAL_COLUMNS)
    for row in report:
        w.writerow([_fmt(getattr(row, k)) for k in INTERVAL_COLUMNS])
    return buf.getvalue()


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _plot_series(trajectory: Trajectory, out: Path) -> list:
    written = []
    for stem, col in PLOT_SERIES:
        y = trajectory.columns[col]
        if col == "C_l1":
            y = 0.5 * y
        lines = ["time,value"]
        for ti, yi in zip(trajectory.time, y):
            if math.isfinite(float(yi)):
                lines.append(f"{_fmt(ti)},{_fmt(yi)}")
        p = out / f"{stem}.csv"
        _write(p, "\n".join(lines) + "\n")
        written.append(p)
    return written


def _render_panels(trajectory: Trajectory, out: Path, time_scale: float, time_label: str) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    t = trajectory.time / time_scale
    for key, (title, cols) in PANELS.items():
        fig, ax = plt.subplots(figsize=(6, 2.6))
        for col in cols:
            y = trajectory.columns[col].astype(float)
            label = col
            if col == "C_l1":
                y, label = 0.5 * y, "C_l1/2"
            ax.plot(t, y, lw=0.8, label=label)
        if key == "f":
            ax.fill_between(t, np.nan_to_num(trajectory.f), alpha=0.3, lw=0)
        ax.set_title(f"({key}) {title}", fontsize=9)
        ax.set_xlabel(f"time [{time_label}]")
        if len(cols) > 1:
            ax.legend(fontsize=7)
        fig.tight_layout()
        p = out / f"panel_{key}.svg"
        # fixed metadata keeps the file reproducible
        fig.savefig(p, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
        written.append(p)
    return written


def emit_outputs(trajectory: Trajectory, report: Optional[IntervalReport], out_dir,
                 manifest: Optional[RunManifest] = None, plot_data: bool = False,
                 render: bool = False, time_unit: tuple = (1.0, "au")) -> dict:
    """Write trajectory.csv, intervals.csv, optional plot files and manifest.json.

    Returns the manifest as a dict; its ``outputs`` maps each written file
    (relative to ``out_dir``) to its sha256.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    p = out / "trajectory.csv"
    _write(p, trajectory_csv_text(trajectory))
    files.append(p)
    p = out / "intervals.csv"
    _write(p, intervals_csv_text(report if report is not None else IntervalReport(())))
    files.append(p)
    if plot_data or render:
        pd = out / "plot_data"
        pd.mkdir(exist_ok=True)
        if plot_data:
            files += _plot_series(trajectory, pd)
        if render:
            files += _render_panels(trajectory, pd, *time_unit)

    man = manifest if manifest is not None else RunManifest(config={})
    data = man.as_dict()
    data["n_samples"] = len(trajectory)
    data["n_invalid"] = int(np.count_nonzero(~trajectory.valid))
    if len(trajectory) == 0:
        data["note"] = "zero samples"
    data["outputs"] = {str(f.relative_to(out)): sha256_of(f) for f in files}
    _write(out / "manifest.json", json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return data


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def verify_manifest(out_dir) -> dict:
    """Map of output file to True/False: does its current hash match the manifest."""
    out = Path(out_dir)
    data = json.loads((out / "manifest.json").read_text())
    return {name: sha256_of(out / name) == digest for name, digest in data["outputs"].items()}
