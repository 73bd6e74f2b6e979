"""Multiple-scattering forward model: point-scatterer wave synthesis,
Green's vector assembly, sensing-matrix construction and sparse-source
dataset generation.

The background medium is homogeneous with speed c0; scattering is modeled
by J point scatterers with complex amplitudes tau_j.  The exciting field
at each scatterer satisfies a self-consistent J x J linear system which we
solve by dense LU, one factorization per wavenumber, reused across all
source positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import zgecon

__all__ = [
    "Medium",
    "ArrayGeometry",
    "ImageGrid",
    "SensingMatrix",
    "SourceConfig",
    "DataSet",
    "FoldyLaxSolver",
    "NumericalDegeneracyError",
    "green0",
    "solve_exciting_fields",
    "total_field",
    "green_vector",
    "green_vectors",
    "assemble_sensing_matrix",
    "generate_dataset",
    "random_medium",
    "linear_array",
    "centered_grid",
]

#: condition-number ceiling above which the scattering system is rejected
CONDITION_LIMIT = 1e12

#: relative residual demanded of every solved exciting-field system
RESIDUAL_TOL = 1e-10


class NumericalDegeneracyError(RuntimeError):
    """The scattering linear system is singular or near-singular."""

    def __init__(self, k: float, cond_estimate: float):
        self.wavenumber = k
        self.cond_estimate = cond_estimate
        super().__init__(
            f"scattering system near-singular at k={k:g} "
            f"(condition estimate {cond_estimate:.3e} > {CONDITION_LIMIT:.0e})"
        )


def _as_points(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 3:
        raise ValueError(f"points must be 3-D, got trailing dimension {a.shape[-1]}")
    return a


@dataclass(frozen=True)
class Medium:
    """Random collection of point scatterers in a homogeneous background.

    scatterer_positions : (J, 3) float array, meters
    scatterer_amplitudes : (J,) complex array, scattering amplitudes tau_j
    background_speed : background speed c0, m/s
    rng_seed : seed the medium was drawn with (bookkeeping only)
    """

    scatterer_positions: np.ndarray
    scatterer_amplitudes: np.ndarray
    background_speed: float
    rng_seed: int = 0

    def __post_init__(self):
        pos = _as_points(self.scatterer_positions).reshape(-1, 3)
        amp = np.asarray(self.scatterer_amplitudes, dtype=complex).reshape(-1)
        if len(pos) != len(amp):
            raise ValueError("positions and amplitudes must have equal length")
        if self.background_speed <= 0:
            raise ValueError("background speed must be positive")
        if len(pos) > 1:
            d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            if d.min() <= 0.0:
                raise ValueError("scatterer positions must be pairwise distinct")
        object.__setattr__(self, "scatterer_positions", pos)
        object.__setattr__(self, "scatterer_amplitudes", amp)

    @property
    def n_scatterers(self) -> int:
        return len(self.scatterer_positions)


@dataclass(frozen=True)
class ArrayGeometry:
    """Receiver array plus the angular frequencies it records.

    receiver_positions : (N, 3) float array, meters
    frequencies : (F,) strictly increasing angular frequencies, rad/s
    """

    receiver_positions: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        pos = _as_points(self.receiver_positions).reshape(-1, 3)
        freq = np.asarray(self.frequencies, dtype=float).reshape(-1)
        if len(pos) < 1 or len(freq) < 1:
            raise ValueError("need at least one receiver and one frequency")
        if np.any(freq <= 0):
            raise ValueError("angular frequencies must be positive")
        if len(freq) > 1 and np.any(np.diff(freq) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "receiver_positions", pos)
        object.__setattr__(self, "frequencies", freq)

    @property
    def n_receivers(self) -> int:
        return len(self.receiver_positions)

    @property
    def n_frequencies(self) -> int:
        return len(self.frequencies)

    @property
    def data_dim(self) -> int:
        """Length N*F of a stacked multi-frequency data vector."""
        return self.n_receivers * self.n_frequencies

    def wavenumbers(self, c0: float) -> np.ndarray:
        return self.frequencies / c0

    def central_wavelength(self, c0: float) -> float:
        return 2.0 * np.pi * c0 / self.frequencies[len(self.frequencies) // 2] \
            if len(self.frequencies) % 2 else \
            4.0 * np.pi * c0 / (self.frequencies[0] + self.frequencies[-1])

    def bandwidth_hz(self) -> float:
        return (self.frequencies[-1] - self.frequencies[0]) / (2.0 * np.pi)

    def aperture(self) -> float:
        """Receiver span (largest pairwise receiver distance)."""
        p = self.receiver_positions
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        return float(d.max())


@dataclass(frozen=True)
class ImageGrid:
    """Rectangular lattice of K candidate source points, row-major with the
    cross-range index fastest: k = i_range * n_cross + i_cross."""

    grid_points: np.ndarray
    n_cross: int
    n_range: int
    spacing_cross: float
    spacing_range: float

    def __post_init__(self):
        pts = _as_points(self.grid_points).reshape(-1, 3)
        if len(pts) != self.n_cross * self.n_range:
            raise ValueError("grid point count must equal n_cross * n_range")
        object.__setattr__(self, "grid_points", pts)

    @property
    def n_points(self) -> int:
        return len(self.grid_points)

    def index_of(self, i_cross: int, i_range: int) -> int:
        return i_range * self.n_cross + i_cross


def centered_grid(center, n_cross: int, n_range: int,
                  spacing_cross: float, spacing_range: float) -> ImageGrid:
    """Rectangular grid centered at `center`; cross-range along x, range along z."""
    cx, cy, cz = np.asarray(center, dtype=float)
    xs = (np.arange(n_cross) - (n_cross - 1) / 2.0) * spacing_cross + cx
    zs = (np.arange(n_range) - (n_range - 1) / 2.0) * spacing_range + cz
    pts = np.array([[x, cy, z] for z in zs for x in xs])
    return ImageGrid(pts, n_cross, n_range, spacing_cross, spacing_range)


def linear_array(n_receivers: int, spacing: float, *, center=(0.0, 0.0, 0.0),
                 frequencies: Sequence[float] = ()) -> ArrayGeometry:
    """Uniform linear array along x centered at `center`."""
    cx, cy, cz = np.asarray(center, dtype=float)
    xs = (np.arange(n_receivers) - (n_receivers - 1) / 2.0) * spacing + cx
    pos = np.stack([xs, np.full(n_receivers, cy), np.full(n_receivers, cz)], axis=1)
    return ArrayGeometry(pos, np.asarray(frequencies, dtype=float))


@dataclass(frozen=True)
class SensingMatrix:
    """Stacked multi-frequency Green's vectors, one column per grid point."""

    entries: np.ndarray
    geometry: ArrayGeometry
    grid: ImageGrid

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (self.geometry.data_dim, self.grid.n_points):
            raise ValueError(
                f"entries shape {e.shape} does not match "
                f"({self.geometry.data_dim}, {self.grid.n_points})")
        object.__setattr__(self, "entries", e)

    def normalized(self) -> np.ndarray:
        """Copy of the entries with unit-norm columns."""
        norms = np.linalg.norm(self.entries, axis=0)
        if np.any(norms == 0):
            raise ValueError("cannot normalize a zero column")
        return self.entries / norms


@dataclass(frozen=True)
class SourceConfig:
    """Sparse source on the grid: support indices with complex amplitudes."""

    support: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=int).reshape(-1)
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if len(sup) != len(amp):
            raise ValueError("support and amplitudes must have equal length")
        if len(np.unique(sup)) != len(sup):
            raise ValueError("support indices must be distinct")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "amplitudes", amp)

    def dense(self, K: int) -> np.ndarray:
        x = np.zeros(K, dtype=complex)
        x[self.support] = self.amplitudes
        return x


@dataclass(frozen=True)
class DataSet:
    """Unlabeled array measurements; configs kept only for evaluation."""

    measurements: np.ndarray
    configs: Optional[list] = None

    def __post_init__(self):
        m = np.asarray(self.measurements, dtype=complex)
        if m.ndim != 2:
            raise ValueError("measurements must be a 2-D matrix")
        if self.configs is not None and len(self.configs) != m.shape[1]:
            raise ValueError("one SourceConfig per measurement column required")
        object.__setattr__(self, "measurements", m)

    @property
    def n_samples(self) -> int:
        return self.measurements.shape[1]


def green0(r, z, k: float):
    """Homogeneous outgoing kernel exp(i k |r-z|) / (4 pi |r-z|).

    Broadcasts over leading dimensions of `r` and `z`.  Coincident points
    are a domain error (the kernel is singular there).
    """
    if k < 0:
        raise ValueError("wavenumber must be nonnegative")
    d = np.linalg.norm(_as_points(r) - _as_points(z), axis=-1)
    if np.any(d == 0.0):
        raise ValueError("green0 is singular at coincident points")
    return np.exp(1j * k * d) / (4.0 * np.pi * d)


class FoldyLaxSolver:
    """LU-factored self-consistent scattering system for one wavenumber.

    Builds and factors (I - A) once, A[j, m] = G0(xi_j - xi_m) * tau_m,
    zero diagonal; exciting fields for any number of sources are then a
    pair of triangular solves each.
    """

    def __init__(self, medium: Medium, k: float):
        if k <= 0:
            raise ValueError("wavenumber must be positive")
        self.medium = medium
        self.k = k
        J = medium.n_scatterers
        if J == 0:
            self._lu = None
            return
        pos = medium.scatterer_positions
        tau = medium.scatterer_amplitudes
        if J == 1:
            self._system = np.ones((1, 1), dtype=complex)
        else:
            d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            np.fill_diagonal(d, 1.0)
            A = np.exp(1j * k * d) / (4.0 * np.pi * d) * tau[None, :]
            np.fill_diagonal(A, 0.0)
            self._system = np.eye(J, dtype=complex) - A
        anorm = np.linalg.norm(self._system, 1)
        self._lu = lu_factor(self._system)
        rcond, info = zgecon(self._lu[0], anorm)
        if info != 0 or rcond <= 0 or 1.0 / rcond > CONDITION_LIMIT:
            cond = np.inf if rcond <= 0 else 1.0 / rcond
            raise NumericalDegeneracyError(k, cond)

    def exciting_fields(self, sources) -> np.ndarray:
        """Exciting field at every scatterer for each source.

        sources : (3,) or (S, 3) array of source positions.
        Returns (J,) or (J, S) complex array matching the input arity.
        """
        J = self.medium.n_scatterers
        src = _as_points(sources)
        single = src.ndim == 1
        src2 = src.reshape(-1, 3)
        if J == 0:
            out = np.zeros((0, len(src2)), dtype=complex)
            return out[:, 0] if single else out
        b = green0(self.medium.scatterer_positions[:, None, :], src2[None, :, :], self.k)
        psi = lu_solve(self._lu, b)
        resid = np.linalg.norm(self._system @ psi - b) / max(np.linalg.norm(b), 1e-300)
        if resid > RESIDUAL_TOL:
            raise NumericalDegeneracyError(self.k, resid / np.finfo(float).eps)
        return psi[:, 0] if single else psi

    def total_fields(self, receivers, sources) -> np.ndarray:
        """Total field at each receiver for each source: (N, S) complex."""
        recv = _as_points(receivers).reshape(-1, 3)
        src = _as_points(sources).reshape(-1, 3)
        out = green0(recv[:, None, :], src[None, :, :], self.k)
        if self.medium.n_scatterers:
            psi = self.exciting_fields(src)
            g_rs = green0(recv[:, None, :],
                          self.medium.scatterer_positions[None, :, :], self.k)
            out = out + g_rs @ (self.medium.scatterer_amplitudes[:, None] * psi)
        return out


def solve_exciting_fields(medium: Medium, source, k: float) -> np.ndarray:
    """Exciting field vector at the J scatterers for a single source."""
    return FoldyLaxSolver(medium, k).exciting_fields(np.asarray(source, dtype=float))


def total_field(medium: Medium, r, z, k: float) -> complex:
    """Total (incident + multiply scattered) field at r due to a source at z."""
    return complex(FoldyLaxSolver(medium, k).total_fields(
        np.asarray(r, dtype=float).reshape(1, 3),
        np.asarray(z, dtype=float).reshape(1, 3))[0, 0])


def green_vectors(medium: Medium, geometry: ArrayGeometry, points) -> np.ndarray:
    """Stacked multi-frequency Green's vectors for a batch of source points.

    Returns an (N*F, S) complex array.  Stacking is frequency-major: entry
    f*N + i is the field at receiver i for frequency f.  One LU
    factorization of the scattering system per frequency, shared by all
    points.
    """
    pts = _as_points(points).reshape(-1, 3)
    c0 = medium.background_speed
    blocks = []
    for k in geometry.wavenumbers(c0):
        solver = FoldyLaxSolver(medium, k)
        blocks.append(solver.total_fields(geometry.receiver_positions, pts))
    return np.concatenate(blocks, axis=0)


def green_vector(medium: Medium, geometry: ArrayGeometry, x) -> np.ndarray:
    """Stacked multi-frequency Green's vector for a single source point."""
    return green_vectors(medium, geometry, np.asarray(x, dtype=float).reshape(1, 3))[:, 0]


def assemble_sensing_matrix(medium: Medium, geometry: ArrayGeometry,
                            grid: ImageGrid) -> SensingMatrix:
    """Sensing matrix whose column k is the Green's vector of grid point k."""
    entries = green_vectors(medium, geometry, grid.grid_points)
    return SensingMatrix(entries, geometry, grid)


AmplitudeLaw = Union[str, Callable[[np.random.Generator, int], np.ndarray]]


def _draw_amplitudes(law: AmplitudeLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    if callable(law):
        return np.asarray(law(rng, n), dtype=complex)
    if law == "complex_gaussian":
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    if law == "uniform_phase":
        return np.exp(2j * np.pi * rng.uniform(size=n))
    if law == "unit":
        return np.ones(n, dtype=complex)
    raise ValueError(f"unknown amplitude law {law!r}")


def generate_dataset(sensing: SensingMatrix, M: int, s: int,
                     amplitude_law: AmplitudeLaw = "complex_gaussian",
                     seed: int = 0, keep_configs: bool = True) -> DataSet:
    """M measurements, each a random s-sparse combination of sensing columns.

    Supports are s distinct uniform grid indices; amplitudes follow
    `amplitude_law`.  Deterministic under a fixed seed.
    """
    K = sensing.grid.n_points
    if M < 1:
        raise ValueError("need at least one sample")
    if not 0 <= s < K:
        raise ValueError(f"sparsity s={s} must satisfy 0 <= s < K={K}")
    rng = np.random.default_rng(seed)
    NF = sensing.entries.shape[0]
    Y = np.zeros((NF, M), dtype=complex)
    configs = []
    for i in range(M):
        support = rng.choice(K, size=s, replace=False)
        amps = _draw_amplitudes(amplitude_law, rng, s)
        configs.append(SourceConfig(support, amps))
        if s:
            Y[:, i] = sensing.entries[:, support] @ amps
    return DataSet(Y, configs if keep_configs else None)


def random_medium(n_scatterers: int, region_x: tuple, region_z: tuple,
                  tau_interval: tuple = (2.0, 4.0), c0: float = 3e8,
                  seed: int = 0) -> Medium:
    """Uniform i.i.d. scatterers in a planar (y = 0) rectangular region with
    real amplitudes drawn uniformly from `tau_interval`."""
    rng = np.random.default_rng(seed)
    J = n_scatterers
    pos = np.stack([
        rng.uniform(region_x[0], region_x[1], J),
        np.zeros(J),
        rng.uniform(region_z[0], region_z[1], J),
    ], axis=1)
    tau = rng.uniform(tau_interval[0], tau_interval[1], J).astype(complex)
    return Medium(pos, tau, c0, rng_seed=seed)
