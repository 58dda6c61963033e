"""
Condensate wavefunctions on a periodic box.

Both the N-dependent Hartree flow and the limiting cubic NLS are integrated
with Strang splitting: a kinetic half step in Fourier space, an exact phase
rotation by the mean-field potential, and another kinetic half step. The
splitting conserves the discrete L² norm exactly up to roundoff.
"""
import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    ContractViolationError,
    GridMismatchError,
    NumericError,
    ResolutionError,
    StepSizeError,
)
from logger import get_logger, log_diagnostic
from physics.scattering import RadialScattering
from utils import save_array

logger = get_logger(task_name="fields")

NORM_TOL = 1e-9
MASS_DRIFT_PER_TIME = 1e-9
ENERGY_DRIFT_TOL = 1e-4
BOUNDARY_MASS_TOL = 1e-8
MAX_SOBOLEV_ORDER = 4


@dataclass(frozen=True)
class Grid:
    """
    Uniform periodic grid with `points` samples per axis on [-L/2, L/2)^dim.

    Attributes:
        dim (int): 1 or 3.
        points (int): G, a power of two.
        length (float): Box length L.
    """

    dim: int
    points: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ContractViolationError(f"dim must be 1 or 3. Given {self.dim}")
        if self.points < 2 or self.points & (self.points - 1):
            raise ContractViolationError(
                f"points per axis must be a power of two. Given {self.points}"
            )
        if not self.length > 0:
            raise ContractViolationError(f"Box length must be positive. Given {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.points

    @property
    def weight(self) -> float:
        return self.dx**self.dim

    @property
    def mode_count(self) -> int:
        return self.points**self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.dim

    @cached_property
    def coordinates(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.points)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.dx)

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.coordinates] * self.dim), indexing="ij"))

    @cached_property
    def k_mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.k_mesh)

    def describe(self) -> Dict:
        return {"dim": self.dim, "G": self.points, "L": self.length}


@dataclass(frozen=True, eq=False)
class GridField:
    """A sampled wavefunction at time `t`."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ContractViolationError(
                f"Field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray, t: Optional[float] = None) -> "GridField":
        return replace(self, values=values, t=self.t if t is None else t)


def max_admissible_n(support_radius: float, dx: float, beta: float) -> float:
    """Largest N whose rescaled support R N^{-β} still spans two grid cells."""
    return (support_radius / (2.0 * dx)) ** (1.0 / beta)


def check_resolvable(grid: Grid, scat: RadialScattering) -> None:
    """
    Refuses interaction ranges shorter than two grid cells.

    Raises:
        ResolutionError: Carrying the largest admissible N for this grid.
    """
    support = scat.support
    if support < 2.0 * grid.dx:
        n_max = max_admissible_n(scat.potential.support_radius, grid.dx, scat.beta)
        raise ResolutionError(
            f"Interaction range R N^-beta = {support:.4g} is below 2 dx = "
            f"{2 * grid.dx:.4g}; the largest admissible N is {n_max:.4g}.",
            max_admissible_n=n_max,
        )


def _check_same_grid(a: GridField, b: GridField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"Fields live on different grids: {a.grid} vs {b.grid}")


def _spectrum(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values)


def mass(phi: GridField) -> float:
    """∫|φ|²."""
    return float(phi.grid.weight * np.sum(np.abs(phi.values) ** 2))


def sobolev_norm(phi: GridField, n: int) -> float:
    """
    Spectral H^n norm (w/M Σ (1+|k|²)^n |φ̂_k|²)^{1/2}.

    Args:
        phi (GridField): The field.
        n (int): Order, 0 <= n <= 4.

    Returns:
        float: ‖φ‖_{H^n}.
    """
    if int(n) != n or not 0 <= n <= MAX_SOBOLEV_ORDER:
        raise ContractViolationError(
            f"Sobolev order must be an integer in [0, {MAX_SOBOLEV_ORDER}]. Given {n}"
        )
    grid = phi.grid
    symbol = (1.0 + grid.k_squared) ** int(n)
    total = np.sum(symbol * np.abs(_spectrum(phi.values)) ** 2)
    return float(math.sqrt(grid.weight / grid.mode_count * total))


def sobolev_distance(a: GridField, b: GridField, n: int) -> float:
    """‖a - b‖_{H^n}."""
    _check_same_grid(a, b)
    return sobolev_norm(a.with_values(a.values - b.values), n)


def l2_distance(a: GridField, b: GridField) -> float:
    """‖a - b‖₂ with the grid quadrature weight."""
    _check_same_grid(a, b)
    return float(math.sqrt(a.grid.weight * np.sum(np.abs(a.values - b.values) ** 2)))


def gradient(values: np.ndarray, grid: Grid) -> List[np.ndarray]:
    """Spectral gradient, one array per axis; the Nyquist mode is dropped."""
    spectrum = _spectrum(values)
    nyquist = grid.points // 2
    components = []
    for axis, k in enumerate(grid.k_mesh):
        symbol = 1j * k
        index = [slice(None)] * grid.dim
        index[axis] = nyquist
        symbol = symbol.copy()
        symbol[tuple(index)] = 0.0
        components.append(np.fft.ifftn(symbol * spectrum))
    return components


def laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.ifftn(-grid.k_squared * _spectrum(values))


class LocalCoupling:
    """Cubic NLS nonlinearity Φ = b0|φ|²."""

    def __init__(self, b0: float):
        self.b0 = float(b0)

    def potential(self, values: np.ndarray) -> np.ndarray:
        return self.b0 * np.abs(values) ** 2

    def describe(self) -> Dict:
        return {"equation": "nls", "b0": self.b0}


class HartreeCoupling:
    """
    Hartree nonlinearity Φ = W_N * |φ|² with W_N(x) = N^{3β} V(N^β x) f_{N,l}(x).

    W_N is sampled at minimal-image distances from the origin and rescaled so
    that its grid integral equals ∫W_N exactly; the convolution is evaluated
    through the FFT.
    """

    def __init__(self, grid: Grid, scat: RadialScattering):
        check_resolvable(grid, scat)
        self.grid = grid
        self.scat = scat
        distances = pair_geometry_origin_distances(grid)
        stretch = scat.N**scat.beta
        sampled = (
            scat.N ** (3.0 * scat.beta)
            * scat.potential(stretch * distances)
            * scat.f(distances.reshape(-1)).reshape(distances.shape)
        )
        total = grid.weight * np.sum(sampled)
        self.integral = scat.coupling_integral()
        if total > 0:
            sampled = sampled * (self.integral / total)
        self.kernel = sampled
        self._kernel_hat = grid.weight * np.fft.fftn(sampled)

    def potential(self, values: np.ndarray) -> np.ndarray:
        density_hat = np.fft.fftn(np.abs(values) ** 2)
        return np.real(np.fft.ifftn(self._kernel_hat * density_hat))

    def describe(self) -> Dict:
        return {
            "equation": "hartree",
            "N": self.scat.N,
            "beta": self.scat.beta,
            "ell": self.scat.ell,
            "coupling_integral": self.integral,
        }


Coupling = Union[LocalCoupling, HartreeCoupling]


def pair_geometry_origin_distances(grid: Grid) -> np.ndarray:
    """Minimal-image distance of every grid point from the origin, FFT order."""
    offsets = np.fft.fftfreq(grid.points, d=1.0 / grid.points) * grid.dx
    mesh = np.meshgrid(*([offsets] * grid.dim), indexing="ij")
    return np.sqrt(sum(m**2 for m in mesh))


def energy(phi: GridField, coupling: Coupling) -> float:
    """∫|∇φ|² + ½∫Φ|φ|²."""
    grid = phi.grid
    spectrum = _spectrum(phi.values)
    kinetic = grid.weight / grid.mode_count * np.sum(grid.k_squared * np.abs(spectrum) ** 2)
    density = np.abs(phi.values) ** 2
    interaction = 0.5 * grid.weight * np.sum(coupling.potential(phi.values) * density)
    return float(kinetic + interaction)


def time_derivative(phi: GridField, coupling: Coupling) -> GridField:
    """∂_t φ = -i(-Δφ + Φφ), evaluated spectrally."""
    values = phi.values
    rhs = -laplacian(values, phi.grid) + coupling.potential(values) * values
    return phi.with_values(-1j * rhs)


def _check_normalized(phi0: GridField) -> None:
    norm = math.sqrt(mass(phi0))
    if abs(norm - 1.0) > NORM_TOL:
        raise ContractViolationError(
            f"Initial condensate must be normalized; ‖phi0‖ = {norm:.12f}"
        )


def _step_count(span: float, dt: float) -> int:
    if dt <= 0:
        raise ContractViolationError(f"dt must be positive. Given {dt}")
    return max(1, int(math.ceil(span / dt - 1e-9)))


def _propagate(values: np.ndarray, grid: Grid, coupling: Coupling, span: float, dt: float):
    steps = _step_count(span, dt)
    h = span / steps
    kinetic_half = np.exp(-0.5j * h * grid.k_squared)
    psi = values
    for _ in range(steps):
        psi = np.fft.ifftn(kinetic_half * np.fft.fftn(psi))
        psi = psi * np.exp(-1j * h * coupling.potential(psi))
        psi = np.fft.ifftn(kinetic_half * np.fft.fftn(psi))
    return psi


def _check_conservation(
    start: GridField, end: GridField, coupling: Coupling, energy0: float
) -> float:
    elapsed = max(end.t - start.t, 1.0)
    mass_drift = abs(mass(end) - mass(start))
    if mass_drift > MASS_DRIFT_PER_TIME * elapsed:
        raise NumericError(
            f"Mass drift {mass_drift:.3e} exceeds {MASS_DRIFT_PER_TIME:.0e} per unit time."
        )
    energy1 = energy(end, coupling)
    drift = abs(energy1 - energy0) / max(1.0, abs(energy0))
    if drift > ENERGY_DRIFT_TOL:
        raise StepSizeError(
            f"Energy drift {drift:.3e} exceeds {ENERGY_DRIFT_TOL:.0e}; reduce dt."
        )
    return energy1


def evolve(phi0: GridField, coupling: Coupling, t_final: float, dt: float) -> GridField:
    """
    Integrates i∂_tφ = -Δφ + Φφ from phi0.t to phi0.t + t_final.

    Raises:
        ContractViolationError: If phi0 is not normalized or dt <= 0.
        StepSizeError: If the relative energy drift exceeds 1e-4.
        NumericError: If mass drifts by more than 1e-9 per unit time.
    """
    _check_normalized(phi0)
    if t_final < 0:
        raise ContractViolationError(f"t_final must be non-negative. Given {t_final}")
    if t_final == 0:
        return phi0
    energy0 = energy(phi0, coupling)
    values = _propagate(phi0.values, phi0.grid, coupling, t_final, dt)
    result = phi0.with_values(values, t=phi0.t + t_final)
    _check_conservation(phi0, result, coupling, energy0)
    return result


def evolve_hartree_N(
    phi0: GridField,
    scat: RadialScattering,
    N: float,
    beta: float,
    t_final: float,
    dt: float,
) -> GridField:
    """Hartree flow with nonlinearity (W_N * |φ|²)φ."""
    if not (math.isclose(scat.N, N) and math.isclose(scat.beta, beta)):
        raise ContractViolationError(
            f"Scattering solution is for N={scat.N}, beta={scat.beta}; "
            f"requested N={N}, beta={beta}."
        )
    coupling = HartreeCoupling(phi0.grid, scat)
    return replace(evolve(phi0, coupling, t_final, dt), label=f"hartree_N{N:g}")


def evolve_nls(phi0: GridField, b0: float, t_final: float, dt: float) -> GridField:
    """Cubic NLS flow with nonlinearity b0|φ|²φ."""
    return replace(evolve(phi0, LocalCoupling(b0), t_final, dt), label="nls")


def evolve_trajectory(
    phi0: GridField, coupling: Coupling, times: Sequence[float], dt: float
) -> Tuple[List[GridField], pd.DataFrame]:
    """
    Evolves phi0 through the sorted sample times.

    Returns:
        Snapshots at each time and a table of (t, mass, energy, h1, h2).
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or times != sorted(times):
        raise ContractViolationError(f"times must be non-negative and sorted. Given {times}")
    _check_normalized(phi0)
    energy0 = energy(phi0, coupling)
    snapshots, rows = [], []
    current = phi0
    for t in times:
        span = t - current.t
        if span > 0:
            values = _propagate(current.values, current.grid, coupling, span, dt)
            current = current.with_values(values, t=t)
            _check_conservation(phi0, current, coupling, energy0)
        snapshots.append(current)
        rows.append(
            {
                "t": t,
                "mass": mass(current),
                "energy": energy(current, coupling),
                "h1": sobolev_norm(current, 1),
                "h2": sobolev_norm(current, 2),
            }
        )
    return snapshots, pd.DataFrame(rows, columns=["t", "mass", "energy", "h1", "h2"])


def normalize(values: np.ndarray, grid: Grid) -> np.ndarray:
    norm = math.sqrt(grid.weight * np.sum(np.abs(values) ** 2))
    if norm == 0:
        raise ContractViolationError("Cannot normalize a zero field.")
    return values / norm


def plane_wave(grid: Grid, mode: Sequence[int]) -> GridField:
    """Normalized Fourier mode exp(i 2π n·x / L) / L^{dim/2}."""
    if len(mode) != grid.dim:
        raise ContractViolationError(f"mode must have {grid.dim} components.")
    phase = sum(2.0 * math.pi * n * x / grid.length for n, x in zip(mode, grid.mesh))
    values = np.exp(1j * phase) / grid.length ** (grid.dim / 2.0)
    return GridField(grid, values, label="plane_wave")


def boundary_mass(phi: GridField) -> float:
    """Mass carried by points within L/4 of the box boundary."""
    grid = phi.grid
    outer = np.zeros(grid.shape, dtype=bool)
    for x in grid.mesh:
        outer |= np.abs(x) > 0.25 * grid.length
    return float(grid.weight * np.sum(np.abs(phi.values[outer]) ** 2))


def gaussian_condensate(
    grid: Grid, width: float, kick: float = 0.0, center: float = 0.0
) -> GridField:
    """
    Normalized Gaussian exp(-|x - center|²/(2 width²)) with an optional
    momentum kick exp(i kick x₁).
    """
    if width <= 0:
        raise ContractViolationError(f"Gaussian width must be positive. Given {width}")
    r2 = sum((x - center) ** 2 for x in grid.mesh)
    values = np.exp(-0.5 * r2 / width**2) * np.exp(1j * kick * grid.mesh[0])
    phi = GridField(grid, normalize(values, grid), label="gaussian")
    log_diagnostic(logger, "Condensate mass near box boundary", boundary_mass(phi), BOUNDARY_MASS_TOL)
    return phi


def upsample_to_half_grid(values: np.ndarray, grid: Grid) -> np.ndarray:
    """
    Band-limited interpolation onto the grid of spacing dx/2.

    The spectrum is zero-padded with the Nyquist coefficient split evenly
    between +G/2 and -G/2, so even-indexed outputs reproduce the input.
    """
    G = grid.points
    half = G // 2
    spectrum = _spectrum(values)
    for axis in range(grid.dim):
        spectrum = np.moveaxis(spectrum, axis, 0)
        padded = np.zeros((2 * G,) + spectrum.shape[1:], dtype=np.complex128)
        padded[:half] = spectrum[:half]
        padded[2 * G - half + 1 :] = spectrum[half + 1 :]
        padded[half] = 0.5 * spectrum[half]
        padded[2 * G - half] = 0.5 * spectrum[half]
        spectrum = np.moveaxis(padded, 0, axis)
    return np.fft.ifftn(spectrum) * 2**grid.dim


@dataclass(frozen=True, eq=False)
class PairGeometry:
    """
    Minimal-image pair data for all (i, j) in C-ordered flattened indexing.

    Attributes:
        offsets: (dim, M, M) integer offsets of x_i - x_j in grid units.
        distances: (M, M) minimal-image distances |x_i - x_j|.
        midpoint_index: (M, M) flat index of (x_i + x_j)/2 on the half grid.
    """

    offsets: np.ndarray
    distances: np.ndarray
    midpoint_index: np.ndarray


@lru_cache(maxsize=4)
def pair_geometry(grid: Grid) -> PairGeometry:
    G = grid.points
    index = np.array(np.unravel_index(np.arange(grid.mode_count), grid.shape))
    offsets = ((index[:, :, None] - index[:, None, :] + G // 2) % G) - G // 2
    midpoint = (2 * index[:, None, :] + offsets) % (2 * G)
    midpoint_index = np.ravel_multi_index(tuple(midpoint), (2 * G,) * grid.dim)
    distances = grid.dx * np.sqrt(np.sum(offsets.astype(float) ** 2, axis=0))
    return PairGeometry(
        offsets=offsets.astype(np.int16),
        distances=distances,
        midpoint_index=midpoint_index,
    )


def save_field(phi: GridField, file_path: str, equation: str, params: Optional[Dict] = None) -> None:
    """Writes the field as raw complex128 plus a JSON sidecar."""
    meta = dict(phi.grid.describe())
    meta.update({"t": phi.t, "equation": equation, "params": params or {}})
    save_array(file_path, phi.values, meta)
