"""
Pair-correlation kernels and their hyperbolic images.

A kernel K(x, y) on the grid is stored densely as `entries[i, j] = K(x_i, x_j)`;
as an operator it acts by the weighted product `weight * entries`.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from errors import ContractViolationError, GridMismatchError, NumericError
from logger import get_logger, log_diagnostic
from physics.fields import (
    Grid,
    GridField,
    gradient,
    pair_geometry,
    upsample_to_half_grid,
)
from physics.scattering import (
    RadialScattering,
    omega_asymp,
    omega_asymp_ball_average,
    omega_asymp_derivative,
)
from utils import save_array

logger = get_logger(task_name="kernels")

MAX_MODES = 4096
SYMMETRY_TOL = 1e-12
HERMITIAN_TOL = 1e-10
SINHC_TAYLOR_CUTOFF = 1e-6


@dataclass(frozen=True, eq=False)
class HSKernel:
    """
    A Hilbert-Schmidt kernel sampled on a grid.

    Attributes:
        grid (Grid): Grid of both arguments.
        entries (np.ndarray): (M, M) complex samples K(x_i, x_j).
        symmetric (bool): If set, entries equal their transpose exactly.
        kind (str): Label ("k_N", "sinh", ...).
        meta (dict): Extra metadata carried into saved sidecars.
    """

    grid: Grid
    entries: np.ndarray
    symmetric: bool = False
    kind: str = ""
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        M = self.grid.mode_count
        if entries.shape != (M, M):
            raise ContractViolationError(
                f"Kernel entries must have shape {(M, M)}. Given {entries.shape}"
            )
        if self.symmetric and not np.array_equal(entries, entries.T):
            raise ContractViolationError(f"Kernel '{self.kind}' flagged symmetric but is not.")
        object.__setattr__(self, "entries", entries)

    @property
    def weight(self) -> float:
        return self.grid.weight

    @property
    def operator(self) -> np.ndarray:
        return self.weight * self.entries

    @property
    def hs_norm(self) -> float:
        return float(self.weight * np.linalg.norm(self.entries))

    def with_entries(self, entries: np.ndarray, kind: str, symmetric: bool = False) -> "HSKernel":
        return HSKernel(self.grid, entries, symmetric=symmetric, kind=kind, meta=dict(self.meta))


@dataclass(frozen=True, eq=False)
class HyperbolicFamily:
    """k together with c = cosh_k, s = sinh_k, p = c - 1 and r = s - k."""

    k: HSKernel
    c: HSKernel
    s: HSKernel
    p: HSKernel
    r: HSKernel


@dataclass(frozen=True, eq=False)
class DerivativeKernels:
    """Derivatives in the first argument; vector kernels are stored per axis."""

    grad1_k: List[HSKernel]
    grad1_p: List[HSKernel]
    grad1_s: List[HSKernel]
    lap1_p: HSKernel
    lap1_r: HSKernel


class ScatteringProfile:
    """Pair profile P(r) = N ω_{N,l}(r) of the N-dependent kernel."""

    def __init__(self, scat: RadialScattering):
        self.scat = scat
        self.N = scat.N
        self.ell = scat.ell

    def value(self, r: np.ndarray) -> np.ndarray:
        return self.N * self.scat.omega(r)

    def derivative(self, r: np.ndarray) -> np.ndarray:
        return self.N * self.scat.domega(r)

    def ball_average(self, h: float) -> float:
        return self.N * self.scat.omega_ball_average(h)

    @property
    def correction_coupling(self) -> float:
        return self.N * self.scat.lam

    def describe(self) -> Dict:
        return {"N": self.N, "beta": self.scat.beta, "ell": self.ell}


class AsymptoticProfile:
    """Limiting pair profile ω_l^asymp."""

    def __init__(self, b0: float, ell: float):
        self.b0 = float(b0)
        self.ell = float(ell)

    def value(self, r: np.ndarray) -> np.ndarray:
        return omega_asymp(self.b0, self.ell, r)

    def derivative(self, r: np.ndarray) -> np.ndarray:
        return omega_asymp_derivative(self.b0, self.ell, r)

    def ball_average(self, h: float) -> float:
        return omega_asymp_ball_average(self.b0, self.ell, h)

    @property
    def correction_coupling(self) -> float:
        return 3.0 * self.b0 / (8.0 * math.pi * self.ell**3)

    def describe(self) -> Dict:
        return {"N": "limit", "b0": self.b0, "ell": self.ell}


Profile = Union[ScatteringProfile, AsymptoticProfile]


def _check_size(grid: Grid) -> None:
    if grid.mode_count > MAX_MODES:
        raise ContractViolationError(
            f"Dense kernels support at most {MAX_MODES} modes. Given {grid.mode_count}"
        )


def pair_profile_matrix(profile: Profile, grid: Grid) -> np.ndarray:
    """P(|x_i - x_j|), with the diagonal replaced by the cell average over radius dx/2."""
    _check_size(grid)
    distances = pair_geometry(grid).distances
    values = np.empty_like(distances)
    off_diagonal = distances > 0
    values[off_diagonal] = profile.value(distances[off_diagonal])
    values[~off_diagonal] = profile.ball_average(0.5 * grid.dx)
    return values


def pair_profile_derivative_matrix(profile: Profile, grid: Grid) -> np.ndarray:
    distances = pair_geometry(grid).distances
    values = np.zeros_like(distances)
    off_diagonal = distances > 0
    values[off_diagonal] = profile.derivative(distances[off_diagonal])
    return values


def midpoint_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Band-limited samples of a field at all pair midpoints (x_i + x_j)/2."""
    half = upsample_to_half_grid(values, grid).reshape(-1)
    return half[pair_geometry(grid).midpoint_index]


def _symmetrized(entries: np.ndarray) -> np.ndarray:
    return 0.5 * (entries + entries.T)


def build_pair_kernel(profile: Profile, phi: GridField, kind: str) -> HSKernel:
    """Entries -P(|x_i - x_j|) φ((x_i + x_j)/2)²."""
    grid = phi.grid
    entries = -pair_profile_matrix(profile, grid) * midpoint_values(phi.values, grid) ** 2
    return HSKernel(grid, _symmetrized(entries), symmetric=True, kind=kind, meta=profile.describe())


def build_k_N(scat: RadialScattering, phi: GridField, N: float) -> HSKernel:
    """k_{N,t}(x, y) = -N ω_{N,l}(x - y) φ((x + y)/2)²."""
    if not math.isclose(scat.N, N):
        raise ContractViolationError(f"Scattering solution is for N={scat.N}; given N={N}")
    return build_pair_kernel(ScatteringProfile(scat), phi, kind="k_N")


def build_k_limit(b0: float, ell: float, phi: GridField) -> HSKernel:
    """k_t(x, y) = -ω_l^asymp(x - y) φ((x + y)/2)²."""
    return build_pair_kernel(AsymptoticProfile(b0, ell), phi, kind="k_limit")


def build_kdot(profile: Profile, phi: GridField, phi_dot: GridField) -> HSKernel:
    """Time derivative of the pair kernel: -P(|x - y|) 2 φ(m) φ̇(m)."""
    if phi.grid != phi_dot.grid:
        raise GridMismatchError("phi and phi_dot live on different grids.")
    grid = phi.grid
    mid = midpoint_values(phi.values, grid)
    mid_dot = midpoint_values(phi_dot.values, grid)
    entries = -pair_profile_matrix(profile, grid) * 2.0 * mid * mid_dot
    return HSKernel(grid, _symmetrized(entries), symmetric=True, kind="kdot", meta=profile.describe())


def identity_kernel(grid: Grid) -> HSKernel:
    """Kernel of the identity operator, I / weight."""
    return HSKernel(
        grid, np.eye(grid.mode_count) / grid.weight, symmetric=True, kind="identity"
    )


def _check_symmetric(k: HSKernel) -> None:
    entries = k.entries
    scale = max(1.0, float(np.max(np.abs(entries))))
    if np.max(np.abs(entries - entries.T)) > SYMMETRY_TOL * scale:
        raise ContractViolationError(f"Kernel '{k.kind}' is not symmetric.")


def _sinhc(sqrt_eigs: np.ndarray) -> np.ndarray:
    small = sqrt_eigs < SINHC_TAYLOR_CUTOFF
    safe = np.where(small, 1.0, sqrt_eigs)
    return np.where(small, 1.0 + sqrt_eigs**2 / 6.0, np.sinh(safe) / safe)


def _family_from_operators(k: HSKernel, c_op: np.ndarray, s_op: np.ndarray) -> HyperbolicFamily:
    w = k.weight
    identity = np.eye(k.grid.mode_count)
    s_entries = _symmetrized(s_op / w)
    return HyperbolicFamily(
        k=k,
        c=k.with_entries(c_op / w, kind="cosh"),
        s=k.with_entries(s_entries, kind="sinh", symmetric=True),
        p=k.with_entries((c_op - identity) / w, kind="p"),
        r=k.with_entries(_symmetrized(s_entries - k.entries), kind="r", symmetric=True),
    )


def hyperbolic(k: HSKernel) -> HyperbolicFamily:
    """
    cosh_k, sinh_k and the remainders p, r by eigendecomposition.

    With K = weight * k, A = K K̄ is Hermitian positive semi-definite for
    symmetric k. Writing A = W D W*, cosh_k = W cosh(√D) W* and
    sinh_k = W sinhc(√D) W* K.

    Raises:
        ContractViolationError: If k is not symmetric.
        NumericError: If A is not Hermitian or the eigensolver fails.
    """
    _check_symmetric(k)
    k_op = k.operator
    a = k_op @ k_op.conj()
    defect = np.linalg.norm(a - a.conj().T)
    if defect > HERMITIAN_TOL * max(1.0, float(np.linalg.norm(a))):
        raise NumericError(f"k k̄ is not Hermitian (defect {defect:.3e}).")
    a = 0.5 * (a + a.conj().T)
    try:
        eigs, vectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Eigendecomposition of k k̄ failed: {exc}") from exc
    roots = np.sqrt(np.clip(eigs, 0.0, None))
    vectors_h = vectors.conj().T
    c_op = (vectors * np.cosh(roots)) @ vectors_h
    s_op = (vectors * _sinhc(roots)) @ vectors_h @ k_op
    return _family_from_operators(k, c_op, s_op)


def hyperbolic_series(k: HSKernel, tol: float = 1e-16, n_max: int = 200) -> HyperbolicFamily:
    """Power series Σ (K K̄)^n / (2n)! and Σ (K K̄)^n K / (2n+1)!."""
    _check_symmetric(k)
    k_op = k.operator
    a = k_op @ k_op.conj()
    M = k.grid.mode_count
    power = np.eye(M, dtype=np.complex128)
    c_op = np.zeros((M, M), dtype=np.complex128)
    s_op = np.zeros((M, M), dtype=np.complex128)
    for n in range(n_max):
        c_term = power / math.factorial(2 * n)
        s_term = power @ k_op / math.factorial(2 * n + 1)
        c_op += c_term
        s_op += s_term
        if n > 0 and np.linalg.norm(c_term) + np.linalg.norm(s_term) < tol:
            break
        power = power @ a
    return _family_from_operators(k, c_op, s_op)


def verify_bogoliubov_identity(c: HSKernel, s: HSKernel) -> float:
    """‖c c* - s s* - 1‖_HS in operator form."""
    if c.grid != s.grid:
        raise GridMismatchError("c and s live on different grids.")
    c_op, s_op = c.operator, s.operator
    defect = c_op @ c_op.conj().T - s_op @ s_op.conj().T - np.eye(c.grid.mode_count)
    return float(np.linalg.norm(defect))


def kernel_norms(k: HSKernel) -> Dict[str, float]:
    """HS norm, sup over rows of the weighted row L² norm, sup of |entries|."""
    magnitudes = np.abs(k.entries)
    return {
        "hs": k.hs_norm,
        "sup_row": float(np.sqrt(k.weight * np.max(np.sum(magnitudes**2, axis=1)))),
        "sup_entry": float(np.max(magnitudes)),
    }


def kernel_distance(a: HSKernel, b: HSKernel) -> float:
    """‖a - b‖_HS."""
    if a.grid != b.grid:
        raise GridMismatchError("Kernels live on different grids.")
    return float(a.weight * np.linalg.norm(a.entries - b.entries))


def log_remainder_diagnostic(family: HyperbolicFamily) -> bool:
    """Logs sup|r| against sinh(‖k‖) sup_row(k)²; a factor of 10 is tolerated."""
    k_norms = kernel_norms(family.k)
    bound = math.sinh(k_norms["hs"]) * k_norms["sup_row"] ** 2
    sup_r = kernel_norms(family.r)["sup_entry"]
    if bound == 0:
        return sup_r == 0
    return log_diagnostic(logger, "sup|r| / (sinh‖k‖ sup_row(k)²)", sup_r / bound, 10.0)


def differentiate_rows(entries: np.ndarray, grid: Grid, symbol: np.ndarray) -> np.ndarray:
    M = grid.mode_count
    axes = tuple(range(grid.dim))
    stacked = entries.reshape(grid.shape + (M,))
    spectrum = np.fft.fftn(stacked, axes=axes)
    derived = np.fft.ifftn(symbol[..., None] * spectrum, axes=axes)
    return derived.reshape(M, M)


def gradient_symbols(grid: Grid) -> List[np.ndarray]:
    symbols = []
    for axis, k in enumerate(grid.k_mesh):
        symbol = 1j * k
        index = [slice(None)] * grid.dim
        index[axis] = grid.points // 2
        symbol[tuple(index)] = 0.0
        symbols.append(symbol)
    return symbols


def derivative_kernels(
    profile: Profile, phi: GridField, family: HyperbolicFamily
) -> DerivativeKernels:
    """
    ∇₁k from the product rule on the kernel formula; ∇₁p, ∇₁s, Δ₁p and Δ₁r
    by spectral differentiation of the hyperbolic outputs in their first
    argument.
    """
    grid = phi.grid
    geometry = pair_geometry(grid)
    distances = geometry.distances
    value = pair_profile_matrix(profile, grid)
    radial = pair_profile_derivative_matrix(profile, grid)
    mid = midpoint_values(phi.values, grid)
    inverse_r = np.divide(1.0, distances, out=np.zeros_like(distances), where=distances > 0)

    grad1_k = []
    for axis, component in enumerate(gradient(phi.values, grid)):
        mid_grad = midpoint_values(component, grid)
        direction = grid.dx * geometry.offsets[axis] * inverse_r
        entries = -(radial * direction * mid**2 + value * mid * mid_grad)
        grad1_k.append(HSKernel(grid, entries, kind=f"grad1_k[{axis}]"))

    symbols = gradient_symbols(grid)
    grad1_p = [
        HSKernel(grid, differentiate_rows(family.p.entries, grid, sym), kind=f"grad1_p[{axis}]")
        for axis, sym in enumerate(symbols)
    ]
    grad1_s = [
        HSKernel(grid, differentiate_rows(family.s.entries, grid, sym), kind=f"grad1_s[{axis}]")
        for axis, sym in enumerate(symbols)
    ]
    lap_symbol = -grid.k_squared
    return DerivativeKernels(
        grad1_k=grad1_k,
        grad1_p=grad1_p,
        grad1_s=grad1_s,
        lap1_p=HSKernel(grid, differentiate_rows(family.p.entries, grid, lap_symbol), kind="lap1_p"),
        lap1_r=HSKernel(grid, differentiate_rows(family.r.entries, grid, lap_symbol), kind="lap1_r"),
    )


def vector_hs_norm(components: List[HSKernel]) -> float:
    """HS norm of a vector kernel, (Σ_c ‖K_c‖²)^{1/2}."""
    return float(math.sqrt(sum(c.hs_norm**2 for c in components)))


def save_kernel(k: HSKernel, file_path: str, meta: Optional[Dict] = None) -> None:
    """Writes the entries as raw complex128 plus a JSON sidecar."""
    sidecar = dict(k.grid.describe())
    sidecar.update(k.meta)
    sidecar.update(meta or {})
    sidecar["kind"] = k.kind
    save_array(file_path, k.entries, sidecar)
