"""Canonical decoherence rates and non-Markovianity diagnostics for the
two-level electronic subsystem.

Conventions: c = <psi_g|psi_e>, Pauli operators over the ordered basis (g, e)
with sigma_1 = |e><g| + |g><e|, sigma_2 = -i|e><g| + i|g><e|,
sigma_3 = |e><e| - |g><g|. Rates are in inverse atomic time units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .differences import central_difference, trapezoid_segments
from .observables import CorrelationScalars, ReducedDensity2
from .propagator import DerivativePair

NM_DEAD_BAND = 1e-8
EQUAL_POP_TOL = 1e-6
DEGENERACY_TOL = 1e-12
TREND_NOISE_FLOOR = 1e-8
MAX_GAP_FRACTION = 0.01

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, 1j], [-1j, 0]],
        [[-1, 0], [0, 1]],
    ],
    dtype=complex,
)  # rows/cols ordered (g, e)

CASE_DESCRIPTIONS = {
    "i": "one negative rate; Bloch volume shrinks",
    "ii": "enhancement of non-Markovianity; two negative rates, Bloch volume grows",
    "iii": "equal populations; gamma2 = -gamma1, gamma3 = 0",
    "iv": "stationary populations; gamma2 = -gamma1, gamma3 = 0",
}


class GuardError(ValueError):
    """Rate formulas are singular: a population or the overlap is below its guard."""

    def __init__(self, which: str, value: float, threshold: float):
        self.which = which
        self.value = value
        self.threshold = threshold
        super().__init__(f"{which} guard tripped: {value:.3e} <= {threshold:.1e}")


class DegeneracyError(ValueError):
    pass


class IntervalError(ValueError):
    pass


class GapError(ValueError):
    """Too many guard-invalid samples inside an integration interval."""


class PhaseSamplingError(ValueError):
    """Consecutive overlap phases differ by too much to unwrap unambiguously."""


@dataclass(frozen=True)
class Guards:
    eps_pop: float = 1e-6
    eps_overlap: float = 1e-6

    def check(self, rho: ReducedDensity2) -> None:
        for name, p in (("population P_g", rho.p_g), ("population P_e", rho.p_e)):
            if p <= self.eps_pop:
                raise GuardError(name, p, self.eps_pop)
        if abs(rho.c) <= self.eps_overlap:
            raise GuardError("overlap |<psi_g|psi_e>|", abs(rho.c), self.eps_overlap)

    def report(self, rho: ReducedDensity2) -> str:
        try:
            self.check(rho)
        except GuardError as err:
            return err.which
        return ""


# ---------------------------------------------------------------------------
# decoherence matrix and canonical rates


@dataclass(frozen=True)
class DecoherenceMatrix3:
    entries: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigenvalues(self) -> np.ndarray:
        """Numerical eigenvalues, descending."""
        return np.linalg.eigvalsh(self.entries)[::-1]


def decoherence_matrix(
    rho: ReducedDensity2, deriv: DerivativePair, guards: Guards = Guards()
) -> DecoherenceMatrix3:
    """Hermitian decoherence matrix D_ij = 2 d_ij built from A(t), B(t)."""
    guards.check(rho)
    A, B = deriv.A, deriv.B
    pg, pe = rho.p_g, rho.p_e
    c = rho.c
    cc = np.conj(c)
    u = A / pe - A / pg
    v = B / c - np.conj(B) / cc
    d11 = ((u + v) / 2j).real
    d22 = ((u - v) / 2j).real
    d12 = 0.5 * (A / pe + A / pg - B / c - np.conj(B) / cc)
    c2 = abs(c) ** 2
    # 1/|c|^2 - 1/(P_g P_e) written through the purity gap
    bracket = rho.purity_gap / (c2 * pg * pe)
    d33 = (-0.5j * A * (pg - pe) * bracket).real
    m = np.zeros((3, 3), dtype=complex)
    m[0, 0] = d11
    m[1, 1] = d22
    m[0, 1] = d12
    m[1, 0] = np.conj(d12)
    m[2, 2] = d33
    return DecoherenceMatrix3(m)


def rate_sum_closed_form(rho: ReducedDensity2, dPg_dt: float) -> float:
    """Sum of the canonical rates (trace of D) in closed form."""
    pgpe = rho.p_g * rho.p_e
    return 0.5 * dPg_dt * (rho.p_g - rho.p_e) * (1.0 / pgpe + 1.0 / abs(rho.c) ** 2)


@dataclass(frozen=True)
class CanonicalRates:
    gamma1: float
    gamma2: float
    gamma3: float
    valid: bool = True
    guard_report: str = ""
    r2: float = math.nan

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma1, self.gamma2, self.gamma3])

    @property
    def rate_sum(self) -> float:
        return self.gamma1 + self.gamma2 + self.gamma3

    @classmethod
    def invalid(cls, report: str) -> CanonicalRates:
        return cls(math.nan, math.nan, math.nan, False, report)


def canonical_rates(
    rho: ReducedDensity2, deriv: DerivativePair, guards: Guards = Guards()
) -> CanonicalRates:
    """Closed-form canonical rates gamma_1 > 0 > gamma_2 and gamma_3."""
    guards.check(rho)
    pg, pe = rho.p_g, rho.p_e
    pgpe = pg * pe
    dpg = deriv.dPg_dt
    c_abs = abs(rho.c)
    dc_over_c = abs(deriv.doverlap_dt) / c_abs
    x = dpg / (2.0 * pgpe)
    mean = x * (pg - pe)
    root = math.hypot(x, dc_over_c)
    # gamma1 * gamma2 = -(dPg^2/(PgPe) + |dc/c|^2); use it to avoid cancellation
    prod = -(dpg * dpg / pgpe + dc_over_c * dc_over_c)
    if mean >= 0:
        g1 = mean + root
        g2 = prod / g1 if g1 != 0 else 0.0
    else:
        g2 = mean - root
        g1 = prod / g2
    g3 = 0.5 * dpg * (pg - pe) * rho.purity_gap / (c_abs * c_abs * pgpe)
    r2 = (4.0 * pgpe**2 / dpg**2) * dc_over_c**2 if dpg != 0 else math.inf
    return CanonicalRates(float(g1), float(g2), float(g3), True, "", float(r2))


def max_relative_rate_deviation(rates: CanonicalRates, D: DecoherenceMatrix3) -> float:
    """Closed-form rates vs numerical eigenvalues, matched by sorting.

    Deviations are relative to the largest rate magnitude of the sample.
    """
    closed = np.sort(rates.gammas)
    numeric = np.sort(D.eigenvalues())
    scale = max(np.abs(closed).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(closed - numeric).max() / scale)


# ---------------------------------------------------------------------------
# canonical channels


@dataclass(frozen=True)
class CanonicalChannels:
    U: np.ndarray
    n1: float
    n2: float
    L_coeffs: np.ndarray  # (3, 3): column k holds L_k's coefficients over sigma_1..3 / sqrt(2)

    @property
    def L_ops(self) -> list[np.ndarray]:
        return [
            np.tensordot(self.L_coeffs[:, k], SIGMA, axes=1) / math.sqrt(2.0) for k in range(3)
        ]


def _block_eigenvector(d11, d12, d22, gamma):
    va = np.array([d12, gamma - d11], dtype=complex)
    vb = np.array([gamma - d22, np.conj(d12)], dtype=complex)
    v = va if np.linalg.norm(va) >= np.linalg.norm(vb) else vb
    v = v / np.linalg.norm(v)
    lead = v[0] if abs(v[0]) > 1e-14 else v[1]
    return v * (abs(lead) / lead)


def canonical_channels(D: DecoherenceMatrix3, rates: CanonicalRates) -> CanonicalChannels:
    """Eigenvector matrix U and decoherence operators L_1, L_2, L_3 = sigma_3/sqrt(2).

    The first component of each (sigma_1, sigma_2) eigenvector is real and
    non-negative, so it equals the normalisation factor n_k.
    """
    if abs(rates.gamma1 - rates.gamma2) < DEGENERACY_TOL:
        raise DegeneracyError("gamma1 == gamma2: eigenvectors are not unique")
    m = D.entries
    d11, d12, d22 = m[0, 0].real, m[0, 1], m[1, 1].real
    u1 = _block_eigenvector(d11, d12, d22, rates.gamma1)
    u2 = _block_eigenvector(d11, d12, d22, rates.gamma2)
    U = np.zeros((3, 3), dtype=complex)
    U[:2, 0] = u1
    U[:2, 1] = u2
    U[2, 2] = 1.0
    return CanonicalChannels(U, float(u1[0].real), float(u2[0].real), U.copy())


def channel_coefficients_closed_form(D: DecoherenceMatrix3, rates: CanonicalRates):
    """n_1, n_2 and the sigma_2/sigma_1 ratios (gamma_k - D11)/D12 as written
    for the generic case D12 != 0."""
    m = D.entries
    d11, d12, d22 = m[0, 0].real, m[0, 1], m[1, 1].real
    g1, g2 = rates.gamma1, rates.gamma2
    n1 = math.sqrt((g1 - d22) / (g1 - g2))
    n2 = math.sqrt((d22 - g2) / (g1 - g2))
    return n1, n2, (g1 - d11) / d12, (g2 - d11) / d12


def reconstruct(channels: CanonicalChannels, rates: CanonicalRates) -> np.ndarray:
    U = channels.U
    return U @ np.diag(rates.gammas) @ U.conj().T


# ---------------------------------------------------------------------------
# per-sample measures


@dataclass(frozen=True)
class NMSample:
    f: float
    f_per_channel: tuple
    n_index: int
    rate_sum: float
    nm_factor: float
    bloch_log_derivative: float
    case_label: str

    @property
    def description(self) -> str:
        return CASE_DESCRIPTIONS[self.case_label]


def case_label(
    nm_factor: float,
    dPg_dt: Optional[float] = None,
    pop_difference: Optional[float] = None,
    dead_band: float = NM_DEAD_BAND,
) -> str:
    """Regime label: i (nm < 0), ii (nm > 0), iii (P_g = P_e), iv (dP_g/dt = 0)."""
    if dPg_dt is not None and abs(dPg_dt) < dead_band:
        return "iv"
    if pop_difference is not None and abs(pop_difference) < EQUAL_POP_TOL:
        return "iii"
    if nm_factor > dead_band:
        return "ii"
    if nm_factor < -dead_band:
        return "i"
    return "iv" if dPg_dt is None else "iii"


def nm_sample(
    rates: CanonicalRates,
    nm_factor: float,
    dPg_dt: Optional[float] = None,
    pop_difference: Optional[float] = None,
) -> NMSample:
    if not rates.valid:
        raise GuardError(rates.guard_report or "rates", math.nan, math.nan)
    fk = tuple(max(0.0, -g) for g in rates.gammas)
    s = rates.rate_sum
    return NMSample(
        f=float(sum(fk)),
        f_per_channel=fk,
        n_index=int(sum(g < 0 for g in rates.gammas)),
        rate_sum=s,
        nm_factor=nm_factor,
        bloch_log_derivative=-2.0 * s,
        case_label=case_label(nm_factor, dPg_dt, pop_difference),
    )


def f_case_closed_form(rho: ReducedDensity2, dPg_dt: float, abs_doverlap_dt: float,
                       scalars: CorrelationScalars) -> float:
    """f(t) from the case-(i) / case-(ii) closed forms (cases iii and iv are
    the dPg/dt -> 0 and P_g = P_e limits of case i)."""
    pgpe = rho.p_g * rho.p_e
    diff = abs(rho.p_g - rho.p_e)
    pref = abs(dPg_dt) / (2.0 * pgpe)
    dc_over_c = abs_doverlap_dt / abs(rho.c)
    # pref * sqrt(1 + r^2) with r^2 = (2 PgPe / dPg)^2 |dc/c|^2
    root = math.hypot(pref, dc_over_c)
    nm = -dPg_dt * (rho.p_g - rho.p_e)
    if nm > 0:
        return pref * diff + root + nm / pgpe * scalars.L / scalars.C_l1**2
    return root - pref * diff


# ---------------------------------------------------------------------------
# interval integrals


def guard_margin(trajectory) -> Optional[np.ndarray]:
    """Signed distance of each sample from the nearest guard threshold.

    Positive where the sample passes all guards. Used to place the edge of
    a guard gap between samples. Thresholds come from the trajectory
    metadata (defaults 1e-6).
    """
    try:
        pg, pe = trajectory.P_g, trajectory.P_e
        ov = np.abs(trajectory.re_overlap + 1j * trajectory.im_overlap)
    except AttributeError:
        return None
    meta = getattr(trajectory, "metadata", {}) or {}
    eps_pop = float(meta.get("eps_pop", 1e-6))
    eps_ov = float(meta.get("eps_overlap", 1e-6))
    return np.minimum(np.minimum(pg - eps_pop, pe - eps_pop), ov - eps_ov)


def _interval_integral(t, y, valid, t1, t2, margin=None):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    if t.size < 2:
        raise IntervalError("trajectory has fewer than two samples")
    span_tol = 1e-9 * max(1.0, abs(t[-1] - t[0]))
    if not t2 > t1:
        raise IntervalError(f"empty interval [{t1}, {t2}]")
    if t1 < t[0] - span_tol or t2 > t[-1] + span_tol:
        raise IntervalError(f"interval [{t1}, {t2}] outside trajectory span [{t[0]}, {t[-1]}]")
    t1 = max(t1, t[0])
    t2 = min(t2, t[-1])
    m = np.zeros_like(t) if margin is None else np.asarray(margin, dtype=float)

    def point(tx):
        j = int(np.searchsorted(t, tx))
        if j < t.size and abs(t[j] - tx) <= span_tol:
            return tx, y[j], bool(valid[j]), m[j]
        j = min(max(j, 1), t.size - 1)
        w = (tx - t[j - 1]) / (t[j] - t[j - 1])
        ok = bool(valid[j - 1] and valid[j])
        val = (1 - w) * y[j - 1] + w * y[j] if ok else 0.0
        return tx, val, ok, (1 - w) * m[j - 1] + w * m[j]

    inside = (t > t1 + span_tol) & (t < t2 - span_tol)
    a = point(t1)
    b = point(t2)
    ts = np.concatenate([[a[0]], t[inside], [b[0]]])
    ys = np.concatenate([[a[1]], np.where(valid[inside], y[inside], 0.0), [b[1]]])
    vs = np.concatenate([[a[2]], valid[inside], [b[2]]])
    ms = np.concatenate([[a[3]], m[inside], [b[3]]])
    area, ok = trapezoid_segments(ts, ys, vs)
    dts = np.diff(ts)
    total = float(np.sum(area))
    gap = float(np.sum(dts[~ok]))
    if margin is not None:
        # segments with one valid end: integrate up to the interpolated guard edge
        edge = (vs[:-1] != vs[1:]) & ((ms[:-1] > 0) != (ms[1:] > 0))
        for k in np.flatnonzero(edge):
            inner, outer = (k, k + 1) if vs[k] else (k + 1, k)
            frac = ms[inner] / (ms[inner] - ms[outer])
            total += ys[inner] * frac * dts[k]
            gap -= frac * dts[k]
    return total, gap, t2 - t1


def total_F_with_gaps(trajectory, t1: float, t2: float) -> tuple[float, float]:
    """(F(t1, t2), total length of guard gaps skipped inside the interval)."""
    value, gap, _ = _interval_integral(trajectory.time, trajectory.f, trajectory.valid, t1, t2,
                                       guard_margin(trajectory))
    return value, gap


def total_F(trajectory, t1: float, t2: float) -> float:
    """Trapezoidal integral of f(t) over [t1, t2], skipping guard gaps."""
    return total_F_with_gaps(trajectory, t1, t2)[0]


def bloch_exponent(trajectory, t0: float, t: float) -> float:
    """-2 times the integrated rate sum over [t0, t]."""
    if t == t0:
        return 0.0
    value, gap, length = _interval_integral(
        trajectory.time, trajectory.rate_sum, trajectory.valid, t0, t, guard_margin(trajectory)
    )
    if gap > MAX_GAP_FRACTION * length:
        raise GapError(
            f"guard-invalid samples cover {gap / length:.1%} of [{t0}, {t}] (limit 1%)"
        )
    return -2.0 * value


def bloch_volume_ratio(trajectory, t0: float, t: float) -> float:
    """V(t) / V(t0) = exp(-2 * integral of the rate sum)."""
    return math.exp(bloch_exponent(trajectory, t0, t))


# ---------------------------------------------------------------------------
# constant-population regime


@dataclass
class AfterPulseF:
    f: np.ndarray
    magnitude_term: np.ndarray
    phase_term: np.ndarray
    cross_check: np.ndarray
    alpha: np.ndarray
    capped: np.ndarray


def unwrap_phase(overlaps, max_step: float = 0.9 * math.pi) -> np.ndarray:
    """Overlap phase continued to the nearest branch between samples."""
    alpha = np.unwrap(np.angle(np.asarray(overlaps)))
    steps = np.abs(np.diff(alpha))
    if steps.size and steps.max() > max_step:
        i = int(np.argmax(steps))
        raise PhaseSamplingError(
            f"phase jumps by {steps[i]:.3f} rad between samples {i} and {i + 1}; "
            "reduce the sampling stride"
        )
    return alpha


def after_pulse_f(times, overlaps, eps_overlap: float = 1e-6, order: int = 4) -> AfterPulseF:
    """f(t) for constant populations from the overlap series c(t).

    f = sqrt((d|c|/dt / |c|)^2 + (d alpha/dt)^2) with alpha the unwrapped
    phase of c. Where |c| <= eps_overlap the magnitude is clamped to the guard
    and the sample is flagged as capped.
    """
    c = np.asarray(overlaps, dtype=complex)
    mag = np.abs(c)
    capped = mag <= eps_overlap
    alpha = unwrap_phase(c)
    dmag = central_difference(times, mag, order)
    dalpha = central_difference(times, alpha, order)
    dc = central_difference(times, c, order)
    safe = np.maximum(mag, eps_overlap)
    magnitude_term = dmag / safe
    f = np.hypot(magnitude_term, dalpha)
    cross = np.abs(dc) / safe
    return AfterPulseF(f, magnitude_term, dalpha, cross, alpha, capped)


def after_pulse_rate_from_potentials(g, e, dr, vg, ve) -> float:
    """|<psi_g|(V_e - V_g)|psi_e>| / |<psi_g|psi_e>| for W = 0."""
    num = abs(np.vdot(g, (ve - vg) * e) * dr)
    return float(num / abs(np.vdot(g, e) * dr))


# ---------------------------------------------------------------------------
# entanglement / coherence relations


@dataclass(frozen=True)
class TrendClassification:
    row: Optional[int]
    predicted_dC: int
    predicted_dIS: int  # 0 when the row leaves the sign undetermined
    observed_dC: int
    observed_dIS: int
    violations: tuple = ()
    margins: dict = field(default_factory=dict)

    @property
    def indeterminate(self) -> bool:
        return self.row is None

    @property
    def consistent(self) -> bool:
        return not self.violations


def classify_trends(derivs: dict, scalars: CorrelationScalars,
                    noise_floor: float = TREND_NOISE_FLOOR) -> TrendClassification:
    """Relate the trends of entanglement, population product and coherences.

    Rows: 1 (dL > 0, dPgPe < 0), 2 (both > 0), 3 (dL < 0, dPgPe > 0),
    4 (both < 0).

    ``derivs`` holds ``dL``, ``dPgPe``, ``dC`` (of C_l1) and ``dIS`` (of the
    skew-information time factor). The row follows from the signs of dL and
    dPgPe; the implied signs of dC and dIS are checked against observation.
    """
    dL, dP, dC, dIS = (float(derivs[k]) for k in ("dL", "dPgPe", "dC", "dIS"))
    if min(abs(dL), abs(dP), abs(dC), abs(dIS)) < noise_floor:
        return TrendClassification(None, 0, 0, 0, 0)
    sL, sP = np.sign(dL), np.sign(dP)
    row = {(1, -1): 1, (1, 1): 2, (-1, 1): 3, (-1, -1): 4}[(int(sL), int(sP))]
    obs_c, obs_is = int(np.sign(dC)), int(np.sign(dIS))

    sq = math.sqrt(2.0 * scalars.L)
    a = dL / (2.0 * sq * (1.0 + sq)) if sq > 0 else math.copysign(math.inf, dL)
    b = dP / (sq + scalars.L + 2.0 * scalars.PgPe)
    c_rel = dC / scalars.C_l1
    margins = {"dPgPe-dL/2": dP - 0.5 * dL, "a": a, "b": b, "dC/C": c_rel}

    pred_c = 1 if dP > 0.5 * dL else -1
    if row == 1:
        pred_is = -1
    elif row == 3:
        pred_is = 1
    elif row == 2:
        if pred_c < 0:
            pred_is = -1
        elif a < b < c_rel:
            pred_is = 1
        elif a > b > c_rel:
            pred_is = -1
        else:
            pred_is = 0
    else:
        if pred_c > 0:
            pred_is = 1
        elif a < b < c_rel:
            pred_is = 1
        elif a > b > c_rel:
            pred_is = -1
        else:
            pred_is = 0
    violations = []
    if obs_c != pred_c:
        violations.append("dC_l1/dt")
    if pred_is != 0 and obs_is != pred_is:
        violations.append("dIS/dt")
    return TrendClassification(row, pred_c, pred_is, obs_c, obs_is, tuple(violations), margins)


def rates_from_correlations(scalars: CorrelationScalars, d_ln_PgPe_dt: float,
                            eps: float = 1e-6) -> tuple[float, float]:
    """(rate sum, gamma_3) written through L(t) and C_l1(t)."""
    if scalars.C_l1 <= eps:
        raise GuardError("coherence C_l1", scalars.C_l1, eps)
    c2 = scalars.C_l1**2
    rate_sum = -d_ln_PgPe_dt * (scalars.L + c2) / c2
    gamma3 = -d_ln_PgPe_dt * scalars.L / c2
    return rate_sum, gamma3


# ---------------------------------------------------------------------------
# trace distance


@dataclass(frozen=True)
class TraceDistanceSample:
    D: float
    dDdt_terms: Optional[tuple] = None
    alpha: Optional[float] = None

    @property
    def dDdt(self) -> Optional[float]:
        if self.dDdt_terms is None or self.D == 0:
            return None
        return sum(self.dDdt_terms) / self.D


def trace_distance(rho0: ReducedDensity2, rho1: ReducedDensity2) -> TraceDistanceSample:
    d = math.hypot(rho0.p_g - rho1.p_g, abs(rho0.c - rho1.c))
    return TraceDistanceSample(d, None, float(np.angle(rho1.c)))


def trace_distance_matrix(rho0: ReducedDensity2, rho1: ReducedDensity2) -> float:
    """Half the trace norm of rho0 - rho1 from the eigenvalues of the difference."""
    return float(0.5 * np.abs(np.linalg.eigvalsh(rho0.matrix() - rho1.matrix())).sum())


def trace_distance_terms(p_g0, c0, p_g, c, dPg_dt, dc_dt, alpha=None):
    """The four right-hand-side terms of D dD/dt for reference state (p_g0, c0).

    Arrays broadcast; ``dc_dt`` is d<psi_g|psi_e>/dt and ``alpha`` (optional,
    unwrapped) the phase of ``c``.
    """
    c = np.asarray(c, dtype=complex)
    dc_dt = np.asarray(dc_dt, dtype=complex)
    mag = np.abs(c)
    mag0 = abs(c0)
    alpha0 = float(np.angle(c0))
    if alpha is None:
        alpha = np.angle(c)
    safe = np.where(mag > 0, mag, 1.0)
    dmag = np.where(mag > 0, (np.conj(c) * dc_dt).real / safe, 0.0)
    dalpha = np.where(mag > 0, (np.conj(c) * dc_dt).imag / safe**2, 0.0)
    t1 = (np.asarray(p_g) - p_g0) * np.asarray(dPg_dt)
    t2 = mag * dmag
    t3 = -mag0 * dmag * np.cos(alpha0 - alpha)
    t4 = -mag0 * mag * np.sin(alpha0 - alpha) * dalpha
    return t1, t2, t3, t4


def trace_distance_series(times, p_g, overlaps, dPg_dt, doverlap_dt, ref_index: int = 0,
                          reference: Optional[ReducedDensity2] = None):
    """D(t) to a reference state plus its term-decomposed rate of change.

    Returns (D, terms, dDdt) where ``terms`` has shape (4, n).
    """
    p_g = np.asarray(p_g, dtype=float)
    c = np.asarray(overlaps, dtype=complex)
    if reference is None:
        pg0, c0 = p_g[ref_index], c[ref_index]
    else:
        pg0, c0 = reference.p_g, reference.c
    D = np.hypot(p_g - pg0, np.abs(c - c0))
    alpha = np.unwrap(np.angle(c))
    terms = np.array(trace_distance_terms(pg0, c0, p_g, c, dPg_dt, doverlap_dt, alpha))
    with np.errstate(divide="ignore", invalid="ignore"):
        dD = np.where(D > 0, terms.sum(axis=0) / np.where(D > 0, D, 1.0), 0.0)
    return D, terms, dD


# ---------------------------------------------------------------------------
# effective Hamiltonian


def effective_hamiltonian(rho: ReducedDensity2, w_ge: complex,
                          eps_overlap: float = 1e-6) -> np.ndarray:
    """Hamiltonian part H(t) of the canonical master equation in the (g, e) basis.

    ``w_ge`` is <psi_g|W|psi_e>.
    """
    c = rho.c
    if abs(c) <= eps_overlap:
        raise GuardError("overlap |<psi_g|psi_e>|", abs(c), eps_overlap)
    c2 = abs(c) ** 2
    off = w_ge / c
    h = -np.array(
        [[rho.p_g * w_ge.real / c2, off], [np.conj(off), rho.p_e * w_ge.real / c2]],
        dtype=complex,
    )
    return h
