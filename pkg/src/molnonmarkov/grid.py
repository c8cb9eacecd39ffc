"""Uniform radial grid, grid wave functions and the spectral kinetic operator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np
import scipy.linalg

if TYPE_CHECKING:
    from .models import PotentialCurve

EDGE_AMPLITUDE_TOL = 1e-6


class GridError(ValueError):
    """Invalid grid specification."""


class GridMismatchError(ValueError):
    """Two wave functions live on different grids."""


class NonFiniteAmplitudeError(ValueError):
    pass


class EigensolverError(RuntimeError):
    pass


class GridEdgeWarning(UserWarning):
    """A requested eigenfunction does not decay before the grid boundary."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on [r_min, r_max) with its conjugate wavenumbers.

    ``r`` holds ``n_points`` nodes starting at ``r_min`` with spacing
    ``dr = (r_max - r_min) / n_points``; ``k_values`` follow numpy's FFT
    ordering.
    """

    r_min: float
    r_max: float
    n_points: int
    dr: float = field(init=False)
    r: np.ndarray = field(init=False, repr=False, compare=False)
    k_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.r_max > self.r_min:
            raise GridError(f"invalid bounds: r_min={self.r_min} >= r_max={self.r_max}")
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise GridError(f"n_points must be an integer >= 8, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        dr = (self.r_max - self.r_min) / self.n_points
        r = self.r_min + dr * np.arange(self.n_points)
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=dr)
        r.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "k_values", k)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / (self.n_points * self.dr)

    @property
    def length(self) -> float:
        return self.r_max - self.r_min


def make_grid(r_min: float, r_max: float, n_points: int) -> SpatialGrid:
    return SpatialGrid(float(r_min), float(r_max), n_points)


@dataclass(frozen=True)
class WaveFunction:
    grid: SpatialGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amp.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes have shape {amp.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(amp)):
            raise NonFiniteAmplitudeError("wave function has non-finite amplitudes")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dr)

    def normalized(self) -> WaveFunction:
        return WaveFunction(self.grid, self.amplitudes / np.sqrt(self.norm2()))

    def __mul__(self, factor: complex) -> WaveFunction:
        return WaveFunction(self.grid, self.amplitudes * factor)

    __rmul__ = __mul__


@dataclass(frozen=True)
class TwoChannelState:
    """The pure molecular state |g>|psi_g> + |e>|psi_e> at ``time``."""

    psi_g: WaveFunction
    psi_e: WaveFunction
    time: float = 0.0

    def __post_init__(self):
        if self.psi_g.grid != self.psi_e.grid:
            raise GridMismatchError("psi_g and psi_e must share one grid")

    @property
    def grid(self) -> SpatialGrid:
        return self.psi_g.grid

    def norm2(self) -> float:
        return self.psi_g.norm2() + self.psi_e.norm2()

    @classmethod
    def from_arrays(cls, grid: SpatialGrid, g: np.ndarray, e: np.ndarray, time: float = 0.0):
        return cls(WaveFunction(grid, g), WaveFunction(grid, e), float(time))


def _check_same_grid(a: WaveFunction, b: WaveFunction) -> None:
    if a.grid != b.grid:
        raise GridMismatchError("wave functions are defined on different grids")


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """<a|b> as a Riemann sum with weight dr, conjugate-linear in ``a``."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.dr)


def kinetic_spectrum(grid: SpatialGrid, mass: float) -> np.ndarray:
    """Diagonal of the kinetic operator in the FFT basis, k^2 / 2m."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    return grid.k_values**2 / (2.0 * mass)


def apply_kinetic(psi: WaveFunction, mass: float) -> WaveFunction:
    """-1/(2m) d^2/dR^2 applied through the discrete Fourier transform."""
    t_k = kinetic_spectrum(psi.grid, mass)
    out = np.fft.ifft(t_k * np.fft.fft(psi.amplitudes))
    if not np.all(np.isfinite(out)):
        raise NonFiniteAmplitudeError("kinetic operator produced non-finite values")
    return WaveFunction(psi.grid, out)


def kinetic_matrix(grid: SpatialGrid, mass: float) -> np.ndarray:
    """Dense real symmetric matrix of the spectral kinetic operator."""
    t_k = kinetic_spectrum(grid, mass)
    eye = np.eye(grid.n_points)
    cols = np.fft.ifft(t_k[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    return 0.5 * (cols + cols.T)


def gaussian(
    grid: SpatialGrid, center: float, width: float, momentum: float = 0.0
) -> WaveFunction:
    """Unit-norm Gaussian packet; ``width`` is the standard deviation of |psi|^2."""
    r = grid.r
    amp = np.exp(-((r - center) ** 2) / (4.0 * width**2) + 1j * momentum * r)
    return WaveFunction(grid, amp).normalized()


def _first_antinode_sign(vec: np.ndarray) -> float:
    mag = np.abs(vec)
    floor = 1e-2 * mag.max()
    interior = (mag[1:-1] >= mag[:-2]) & (mag[1:-1] >= mag[2:]) & (mag[1:-1] > floor)
    idx = np.flatnonzero(interior)
    i = idx[0] + 1 if idx.size else int(np.argmax(mag))
    return 1.0 if vec[i] >= 0 else -1.0


def vibrational_eigenstates(
    potential: PotentialCurve | Callable[[np.ndarray], np.ndarray],
    grid: SpatialGrid,
    mass: float,
    count: int,
) -> list[tuple[float, WaveFunction]]:
    """Lowest ``count`` eigenpairs of T + V on the grid.

    Eigenfunctions are unit-norm and real, with a positive value at the first
    antinode (first local maximum of |psi| above 1% of its peak).
    """
    from .models import evaluate_potential

    if count < 1:
        raise ValueError("count must be >= 1")
    if count > grid.n_points:
        raise ValueError("count exceeds the number of grid points")
    if callable(potential) and not hasattr(potential, "kind"):
        v = np.asarray(potential(grid.r), dtype=float)
    else:
        v = evaluate_potential(potential, grid.r)
    if not np.all(np.isfinite(v)):
        raise ValueError("potential is not finite on the grid")
    h = kinetic_matrix(grid, mass)
    h[np.diag_indices_from(h)] += v
    try:
        energies, vecs = scipy.linalg.eigh(h, subset_by_index=(0, count - 1))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigensolverError(str(exc)) from exc
    vecs = vecs / np.sqrt(grid.dr)
    out = []
    for n in range(count):
        vec = vecs[:, n] * _first_antinode_sign(vecs[:, n])
        out.append((float(energies[n]), WaveFunction(grid, vec)))
    top = vecs[:, count - 1]
    edge = max(abs(top[0]), abs(top[-1]))
    if edge > EDGE_AMPLITUDE_TOL:
        warnings.warn(
            f"eigenstate {count - 1} has amplitude {edge:.2e} at the grid edge; "
            "enlarge the grid",
            GridEdgeWarning,
            stacklevel=2,
        )
    return out
