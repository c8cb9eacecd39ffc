"""YAML scenario files: parsing, validation and echo.

A quantity may be written as a bare number (atomic units), as a string
such as ``"3.29 cm-1"`` or ``"50 ps"``, or as ``{value: 50, unit: ps}``.
A scenario may declare its own time unit with ``time_unit: {name: tu, au: 1303.3}``
and then use it like any other (``"50 tu"``).

Schema errors carry the dotted path of the offending field.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path
from typing import Any

import yaml

from .grid import make_grid
from .models import (
    CouplingSpec,
    InitialState,
    PotentialCurve,
    PulseEnvelope,
    ScenarioConfig,
    load_tabulated,
)
from .units import UnitError, canonical_unit, dimension_of, to_atomic


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message

    def __reduce__(self):
        return type(self), (self.path, self.message)


_TOP_KEYS = {
    "name", "preset", "time_unit", "grid", "mass", "potentials", "coupling",
    "initial_state", "integrator", "guards", "report",
}


def _section(raw: dict, key: str, path: str = "") -> dict:
    value = raw.get(key, {})
    where = f"{path}.{key}" if path else key
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(where, "expected a mapping")
    return value


def _check_keys(section: dict, allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown field")


class _QuantityReader:
    """Turns config quantities into atomic units, honouring a scenario time unit."""

    def __init__(self, time_unit: dict | None):
        self.custom = {}
        if time_unit:
            name = str(time_unit.get("name", "")).strip().lower()
            scale = time_unit.get("au")
            if not name or not isinstance(scale, (int, float)) or not scale > 0:
                raise ConfigError("time_unit", "needs a name and a positive 'au' scale")
            self.custom[name] = float(scale)

    def __call__(self, value: Any, dimension: str, path: str) -> float:
        if isinstance(value, bool):
            raise ConfigError(path, "expected a number or a quantity")
        if isinstance(value, (int, float)):
            out = float(value)
        elif isinstance(value, str):
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(path, f"cannot read quantity {value!r}")
            out = self._convert(parts[0], parts[1], dimension, path)
        elif isinstance(value, dict) and set(value) == {"value", "unit"}:
            out = self._convert(value["value"], str(value["unit"]), dimension, path)
        else:
            raise ConfigError(path, f"cannot read quantity {value!r}")
        if not math.isfinite(out):
            raise ConfigError(path, "must be finite")
        return out

    def _convert(self, number, unit: str, dimension: str, path: str) -> float:
        try:
            number = float(number)
        except (TypeError, ValueError):
            raise ConfigError(path, f"{number!r} is not a number") from None
        key = unit.strip().lower()
        if key in self.custom:
            if dimension != "time":
                raise ConfigError(path, f"unit {unit!r} is a time unit, expected {dimension}")
            return number * self.custom[key]
        try:
            canonical_unit(unit)
        except UnitError as err:
            raise ConfigError(path, str(err)) from None
        if dimension_of(unit) != dimension:
            raise ConfigError(path, f"unit {unit!r} is not a {dimension} unit")
        return float(to_atomic(number, unit))


def _number(section: dict, key: str, path: str, *, default=None, kind=float):
    where = f"{path}.{key}"
    if key not in section:
        if default is None:
            raise ConfigError(where, "required field missing")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, "expected a number")
    if kind is int:
        if int(value) != value:
            raise ConfigError(where, "expected an integer")
        return int(value)
    return float(value)


def _potential(raw: dict, path: str, q: _QuantityReader, base_dir: Path) -> PotentialCurve:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping")
    kind = raw.get("kind")
    e = lambda key, default=None: (  # noqa: E731
        q(raw[key], "energy", f"{path}.{key}") if key in raw else default
    )
    ln = lambda key, default=None: (  # noqa: E731
        q(raw[key], "length", f"{path}.{key}") if key in raw else default
    )
    try:
        if kind == "flat":
            _check_keys(raw, {"kind", "offset"}, path)
            return PotentialCurve.flat(e("offset", 0.0))
        if kind == "harmonic":
            _check_keys(raw, {"kind", "r0", "force_constant", "omega", "offset"}, path)
            if "r0" not in raw:
                raise ConfigError(f"{path}.r0", "required field missing")
            if "force_constant" in raw:
                k = _number(raw, "force_constant", path)
                return PotentialCurve.harmonic(ln("r0"), k, offset=e("offset", 0.0))
            if "omega" not in raw:
                raise ConfigError(f"{path}.omega", "harmonic curve needs omega or force_constant")
            return _HarmonicPending(ln("r0"), e("omega"), e("offset", 0.0))
        if kind == "morse":
            _check_keys(raw, {"kind", "D_e", "a", "r0", "offset"}, path)
            for key in ("D_e", "a", "r0"):
                if key not in raw:
                    raise ConfigError(f"{path}.{key}", "required field missing")
            return PotentialCurve.morse(e("D_e"), _number(raw, "a", path), ln("r0"), e("offset", 0.0))
        if kind == "tabulated":
            _check_keys(raw, {"kind", "file"}, path)
            if "file" not in raw:
                raise ConfigError(f"{path}.file", "required field missing")
            file = Path(raw["file"])
            if not file.is_absolute():
                file = base_dir / file
            if not file.exists():
                raise ConfigError(f"{path}.file", f"no such file {str(file)!r}")
            return load_tabulated(file)
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(path, str(err)) from None
    raise ConfigError(f"{path}.kind", f"unknown potential kind {kind!r}")


class _HarmonicPending:
    """Harmonic curve given by omega; needs the scenario mass to resolve."""

    def __init__(self, r0, omega, offset):
        self.r0, self.omega, self.offset = r0, omega, offset

    def resolve(self, mass: float) -> PotentialCurve:
        return PotentialCurve.harmonic(self.r0, omega=self.omega, mass=mass, offset=self.offset)


def _envelope(raw, path: str, q: _QuantityReader):
    if raw is None or raw == "constant":
        return None
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected a mapping or 'constant'")
    _check_keys(raw, {"t_start", "t_rise", "t_plateau", "t_fall", "shape"}, path)
    times = {}
    for key in ("t_start", "t_rise", "t_plateau", "t_fall"):
        if key not in raw:
            raise ConfigError(f"{path}.{key}", "required field missing")
        times[key] = q(raw[key], "time", f"{path}.{key}")
        if key != "t_start" and times[key] < 0:
            raise ConfigError(f"{path}.{key}", "must be non-negative")
    shape = raw.get("shape", "sine-squared")
    if shape not in ("linear", "sine-squared"):
        raise ConfigError(f"{path}.shape", "must be 'linear' or 'sine-squared'")
    return PulseEnvelope(shape=shape, **times)


def auto_time_step(grid, mass, v_g, v_e, strength, span, stride, phase_limit=0.45) -> float:
    """Default dt: the smaller of a plateau Rabi period / 2000 and the
    kinetic limit, shrunk so that ``span`` holds a whole number of
    ``2 * stride`` steps (stride-halving then lands on the same end point).
    """
    from .grid import kinetic_spectrum
    from .models import evaluate_potential

    vg = evaluate_potential(v_g, grid.r)
    ve = evaluate_potential(v_e, grid.r)
    v_range = max(vg.max(), ve.max()) - min(vg.min(), ve.min())
    e_max = float(kinetic_spectrum(grid, mass).max()) + float(v_range) + abs(strength)
    dt = phase_limit / e_max
    if strength:
        dt = min(dt, math.pi / abs(strength) / 2000.0)
    block = 2 * stride
    n = math.ceil(span / dt / block) * block
    return span / n


def _integrator(raw: dict, q: _QuantityReader):
    path = "integrator"
    _check_keys(raw, {"method", "dt", "t_final", "t_initial", "sample_stride", "chebyshev_order"}, path)
    method = raw.get("method", "split-operator")
    if method not in ("split-operator", "chebyshev"):
        raise ConfigError(f"{path}.method", "must be 'split-operator' or 'chebyshev'")
    if "t_final" not in raw:
        raise ConfigError(f"{path}.t_final", "required field missing")
    t_final = q(raw["t_final"], "time", f"{path}.t_final")
    t_initial = q(raw.get("t_initial", 0.0), "time", f"{path}.t_initial")
    if not t_final > t_initial:
        raise ConfigError(f"{path}.t_final", "must exceed t_initial")
    dt = raw.get("dt", "auto")
    if dt != "auto":
        dt = q(dt, "time", f"{path}.dt")
        if not dt > 0:
            raise ConfigError(f"{path}.dt", "must be positive")
    stride = _number(raw, "sample_stride", path, default=1, kind=int)
    if stride < 1:
        raise ConfigError(f"{path}.sample_stride", "must be >= 1")
    order = _number(raw, "chebyshev_order", path, default=0, kind=int)
    if method == "chebyshev" and order and order < 4:
        raise ConfigError(f"{path}.chebyshev_order", "must be >= 4")
    return method, dt, t_initial, t_final, stride, order


def build_config(raw: dict, base_dir: Path | str = ".") -> ScenarioConfig:
    """Validate a raw mapping (already merged with any preset) into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    _check_keys(raw, _TOP_KEYS, "")
    base_dir = Path(base_dir)
    q = _QuantityReader(raw.get("time_unit"))
    name = str(raw.get("name", "scenario"))

    g = _section(raw, "grid")
    _check_keys(g, {"r_min", "r_max", "n_points"}, "grid")
    r_min = q(g["r_min"], "length", "grid.r_min") if "r_min" in g else None
    r_max = q(g["r_max"], "length", "grid.r_max") if "r_max" in g else None
    if r_min is None or r_max is None:
        raise ConfigError("grid.r_min" if r_min is None else "grid.r_max", "required field missing")
    n_points = _number(g, "n_points", "grid", default=1024, kind=int)
    if not r_max > r_min:
        raise ConfigError("grid.r_max", "must exceed grid.r_min")
    if n_points < 8:
        raise ConfigError("grid.n_points", "must be >= 8")
    grid = make_grid(r_min, r_max, n_points)

    if "mass" not in raw:
        raise ConfigError("mass", "required field missing")
    mass = q(raw["mass"], "mass", "mass")
    if not mass > 0:
        raise ConfigError("mass", "must be positive")

    pots = _section(raw, "potentials")
    _check_keys(pots, {"g", "e"}, "potentials")
    curves = {}
    for ch in ("g", "e"):
        if ch not in pots:
            raise ConfigError(f"potentials.{ch}", "required field missing")
        curve = _potential(pots[ch], f"potentials.{ch}", q, base_dir)
        if isinstance(curve, _HarmonicPending):
            curve = curve.resolve(mass)
        curves[ch] = curve

    cp = _section(raw, "coupling")
    _check_keys(cp, {"strength", "envelope"}, "coupling")
    if "strength" not in cp:
        raise ConfigError("coupling.strength", "required field missing")
    strength = q(cp["strength"], "energy", "coupling.strength")
    envelope = _envelope(cp.get("envelope"), "coupling.envelope", q)

    ini = _section(raw, "initial_state")
    _check_keys(ini, {"channel", "kind", "index", "potential", "center", "width", "momentum", "p_g"},
                "initial_state")
    try:
        init = InitialState(
            channel=ini.get("channel", "e"),
            kind=ini.get("kind", "eigenstate"),
            index=_number(ini, "index", "initial_state", default=0, kind=int),
            potential=ini.get("potential"),
            center=q(ini.get("center", 0.0), "length", "initial_state.center"),
            width=q(ini.get("width", 1.0), "length", "initial_state.width"),
            momentum=_number(ini, "momentum", "initial_state", default=0.0),
            p_g=None if ini.get("p_g") is None else _number(ini, "p_g", "initial_state"),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError("initial_state", str(err)) from None

    method, dt, t_initial, t_final, stride, order = _integrator(_section(raw, "integrator"), q)
    if dt == "auto":
        dt = auto_time_step(grid, mass, curves["g"], curves["e"], strength,
                            t_final - t_initial, stride)

    guards = _section(raw, "guards")
    _check_keys(guards, {"eps_pop", "eps_overlap"}, "guards")
    eps = {}
    for key in ("eps_pop", "eps_overlap"):
        eps[key] = _number(guards, key, "guards", default=1e-6)
        if not 0 < eps[key] <= 1e-2:
            raise ConfigError(f"guards.{key}", "must lie in (0, 1e-2]")

    rep = _section(raw, "report")
    _check_keys(rep, {"intervals"}, "report")
    bounds = rep.get("intervals", [])
    if not isinstance(bounds, list):
        raise ConfigError("report.intervals", "expected a list of times")
    intervals = tuple(q(b, "time", f"report.intervals[{i}]") for i, b in enumerate(bounds))
    if any(b2 <= b1 for b1, b2 in zip(intervals, intervals[1:])):
        raise ConfigError("report.intervals", "boundaries must be strictly increasing")

    units = {}
    if raw.get("time_unit"):
        units = {"time_name": str(raw["time_unit"]["name"]), "time_au": float(raw["time_unit"]["au"])}
    return ScenarioConfig(
        name=name, grid=grid, mass=mass, V_g=curves["g"], V_e=curves["e"],
        coupling=CouplingSpec(strength, envelope), initial_state=init, dt=dt,
        t_final=t_final, t_initial=t_initial, sample_stride=stride,
        eps_pop=eps["eps_pop"], eps_overlap=eps["eps_overlap"], method=method,
        chebyshev_order=order, report_intervals=intervals, units=units,
    )


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_raw(raw: dict) -> dict:
    """Expand a ``preset:`` reference; fields given alongside it override the preset."""
    from .presets import preset_raw

    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    if "preset" not in raw:
        return copy.deepcopy(raw)
    try:
        base = preset_raw(raw["preset"])
    except KeyError:
        raise ConfigError("preset", f"unknown preset {raw['preset']!r}") from None
    over = {k: v for k, v in raw.items() if k != "preset"}
    return _merge(base, over)


def load_raw(path) -> dict:
    """Read a scenario file, or a bare preset name, into a resolved mapping."""
    from .presets import PRESETS

    text_path = Path(path)
    if not text_path.exists():
        if str(path) in PRESETS:
            return resolve_raw({"preset": str(path)})
        raise FileNotFoundError(f"no such config file: {path}")
    with open(text_path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    return resolve_raw(raw)


def parse_config(path) -> ScenarioConfig:
    """Scenario file (or preset name) to a fully resolved ScenarioConfig."""
    raw = load_raw(path)
    base = Path(path).parent if Path(path).exists() else Path(".")
    return build_config(raw, base)


def set_field(raw: dict, dotted: str, value) -> dict:
    """Copy of ``raw`` with the field at ``dotted`` (e.g. ``coupling.strength``) replaced."""
    out = copy.deepcopy(raw)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        nxt = node.setdefault(key, {})
        if not isinstance(nxt, dict):
            raise ConfigError(dotted, f"{key!r} is not a section")
        node = nxt
    node[keys[-1]] = value
    return out


def config_echo(config: ScenarioConfig) -> dict:
    """Plain-data description of a resolved config, atomic units throughout."""
    env = config.coupling.envelope
    init = config.initial_state
    return {
        "name": config.name,
        "grid": {"r_min": config.grid.r_min, "r_max": config.grid.r_max,
                 "n_points": config.grid.n_points},
        "mass": config.mass,
        "potentials": {"g": config.V_g.describe(), "e": config.V_e.describe()},
        "coupling": {
            "strength": config.coupling.strength,
            "envelope": None if env is None else {
                "t_start": env.t_start, "t_rise": env.t_rise, "t_plateau": env.t_plateau,
                "t_fall": env.t_fall, "shape": env.shape,
            },
        },
        "initial_state": {
            "channel": init.channel, "kind": init.kind, "index": init.index,
            "potential": init.potential, "center": init.center, "width": init.width,
            "momentum": init.momentum, "p_g": init.p_g,
        },
        "integrator": {
            "method": config.method, "dt": config.dt, "t_initial": config.t_initial,
            "t_final": config.t_final, "sample_stride": config.sample_stride,
            "chebyshev_order": config.chebyshev_order, "n_steps": config.n_steps,
        },
        "guards": {"eps_pop": config.eps_pop, "eps_overlap": config.eps_overlap},
        "report": {"intervals": list(config.report_intervals)},
        "units": dict(config.units),
    }
