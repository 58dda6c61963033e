"""
Quadratic generators in the orthonormal mode basis b_i = √w a(x_i).

A generator is H = Σ A_ij b_i* b_j + ½ Σ B_ij b_i* b_j* + ½ Σ B̄_ij b_i b_j
+ phase. Every displayed term of the form ∫ a^♯(g_x) a^♯(h_x) is
accumulated by one of four primitives, where the families x ↦ g_x are
passed as column matrices G[y, x] = w g_x(y) (the operator matrix of the
kernel (y, x) ↦ g_x(y)) and the integration weight as an operator `m`.
"""
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import AssemblyError, ContractViolationError, TruncationError
from logger import get_logger
from physics.fields import (
    Grid,
    GridField,
    HartreeCoupling,
    LocalCoupling,
    check_resolvable,
    gradient,
    laplacian,
    pair_geometry,
    time_derivative,
)
from physics.kernels import (
    AsymptoticProfile,
    DerivativeKernels,
    HSKernel,
    HyperbolicFamily,
    Profile,
    ScatteringProfile,
    build_kdot,
    build_pair_kernel,
    derivative_kernels,
    differentiate_rows,
    gradient_symbols,
    hyperbolic,
    midpoint_values,
    pair_profile_matrix,
)
from physics.scattering import RadialScattering
from utils import save_array, save_json

logger = get_logger(task_name="generator")

HERMITIAN_TOL = 1e-10
PHASE_IMAG_TOL = 1e-10
SERIES_TOL = 1e-10
SERIES_MAX_TERMS = 40

Weight = Optional[np.ndarray]


@dataclass(frozen=True, eq=False)
class QuadGenerator:
    """
    Normal-ordered quadratic generator.

    Attributes:
        A (np.ndarray): Hermitian coefficient of b*b.
        B (np.ndarray): Symmetric coefficient of ½ b*b*; the bb block is B̄.
        phase (float): Normal-ordering constant of the assembled blocks. The
            scalar η_N is not folded in; it is carried in `eta`.
        weight (float): Grid quadrature weight.
        eta (float): The separately tracked scalar η_N (zero for the limit).
        truncation_residual (float): Bound on the discarded series tail.
        meta (dict): Provenance.
    """

    A: np.ndarray
    B: np.ndarray
    phase: float
    weight: float
    eta: float = 0.0
    truncation_residual: float = 0.0
    meta: Dict = field(default_factory=dict)

    @property
    def mode_count(self) -> int:
        return self.A.shape[0]

    def __add__(self, other: "QuadGenerator") -> "QuadGenerator":
        if self.A.shape != other.A.shape or not math.isclose(self.weight, other.weight):
            raise ContractViolationError("Cannot add generators built on different grids.")
        return QuadGenerator(
            A=self.A + other.A,
            B=self.B + other.B,
            phase=self.phase + other.phase,
            weight=self.weight,
            eta=self.eta + other.eta,
            truncation_residual=self.truncation_residual + other.truncation_residual,
            meta={**self.meta, **other.meta},
        )

    def hermitian_defect(self) -> float:
        return float(np.linalg.norm(self.A - self.A.conj().T))

    def symmetric_defect(self) -> float:
        return float(np.linalg.norm(self.B - self.B.T))

    def norm(self) -> float:
        """Frobenius norm of the Bogoliubov-de Gennes matrix."""
        return float(math.sqrt(2.0 * (np.linalg.norm(self.A) ** 2 + np.linalg.norm(self.B) ** 2)))


def zero_generator(mode_count: int, weight: float) -> QuadGenerator:
    zeros = np.zeros((mode_count, mode_count), dtype=np.complex128)
    return QuadGenerator(zeros, zeros.copy(), 0.0, weight)


def _weighted(m: Weight, matrix: np.ndarray) -> np.ndarray:
    if m is None:
        return matrix
    if m.ndim == 1:
        return m[:, None] * matrix
    return m @ matrix


class GeneratorBuilder:
    """
    Accumulates ∫ a^♯(g_x) a^♯(h_x) terms into (A, B, B̄, phase).

    `m` is None (unit weight), a vector (diagonal weight of a single integral)
    or a matrix (w M(x, y) for a double integral).
    """

    def __init__(self, mode_count: int, weight: float):
        self.weight = weight
        self.A = np.zeros((mode_count, mode_count), dtype=np.complex128)
        self.B = np.zeros_like(self.A)
        self.B_annihilation = np.zeros_like(self.A)
        self.phase = 0.0 + 0.0j

    def add_matrix(self, matrix: np.ndarray) -> None:
        self.A += matrix

    def creation_annihilation(self, g: np.ndarray, h: np.ndarray, m: Weight = None) -> None:
        """a*(g_x) a(h_x)."""
        self.A += g @ _weighted(m, h.conj().T)

    def creation_pair(self, g: np.ndarray, h: np.ndarray, m: Weight = None) -> None:
        """a*(g_x) a*(h_x)."""
        pair = g @ _weighted(m, h.T)
        self.B += pair + pair.T

    def annihilation_pair(self, g: np.ndarray, h: np.ndarray, m: Weight = None) -> None:
        """a(g_x) a(h_x)."""
        pair = g.conj() @ _weighted(m, h.conj().T)
        self.B_annihilation += pair + pair.T

    def annihilation_creation(self, g: np.ndarray, h: np.ndarray, m: Weight = None) -> None:
        """a(g_x) a*(h_x), normal-ordered: the commutator trace goes to the phase."""
        ordered = g.conj() @ _weighted(m, h.T)
        self.A += ordered.T
        self.phase += np.trace(ordered)

    def add_nambu(self, nambu: np.ndarray) -> None:
        """½ ξ* h ξ with ξ = (b, b*)."""
        M = self.A.shape[0]
        h11, h12 = nambu[:M, :M], nambu[:M, M:]
        h21, h22 = nambu[M:, :M], nambu[M:, M:]
        self.A += 0.5 * (h11 + h22.T)
        self.B += h12
        self.B_annihilation += h21
        self.phase += 0.5 * np.trace(h22)

    def build(self, eta: float = 0.0, truncation_residual: float = 0.0, meta: Optional[Dict] = None) -> QuadGenerator:
        """
        Checks the accumulated blocks and returns the generator.

        Raises:
            AssemblyError: If A is not Hermitian, the bb block is not the
                conjugate of B, or the phase is not real.
        """
        scale = max(1.0, float(np.linalg.norm(self.A)), float(np.linalg.norm(self.B)))
        hermitian = np.linalg.norm(self.A - self.A.conj().T)
        if hermitian > HERMITIAN_TOL * scale:
            raise AssemblyError(f"Assembled A is not Hermitian (defect {hermitian:.3e}).")
        pairing = np.linalg.norm(self.B_annihilation - self.B.conj())
        if pairing > HERMITIAN_TOL * scale:
            raise AssemblyError(f"bb block is not the conjugate of B (defect {pairing:.3e}).")
        if abs(self.phase.imag) > PHASE_IMAG_TOL * max(1.0, abs(self.phase)):
            raise AssemblyError(f"Phase has imaginary part {self.phase.imag:.3e}.")
        return QuadGenerator(
            A=0.5 * (self.A + self.A.conj().T),
            B=0.5 * (self.B + self.B.T),
            phase=float(self.phase.real),
            weight=self.weight,
            eta=float(eta),
            truncation_residual=float(truncation_residual),
            meta=dict(meta or {}),
        )


def kinetic_matrix(grid: Grid) -> np.ndarray:
    """-Δ in the mode basis, F⁻¹ diag(|k|²) F."""
    identity = np.eye(grid.mode_count, dtype=np.complex128)
    return np.real(differentiate_rows(identity, grid, grid.k_squared)).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class ADSeriesTerm:
    n: int
    f1: HSKernel
    f2: HSKernel
    parity: str


@dataclass(frozen=True, eq=False)
class ADSeries:
    """The computed terms of (i∂_t T*)T, its generator and the tail bound."""

    terms: List[ADSeriesTerm]
    generator: QuadGenerator
    residual_bound: float

    @property
    def phase_contribution(self) -> float:
        return self.generator.phase


def series_bound(n: int, k_norm: float, kdot_norm: float) -> float:
    """2ⁿ ‖k‖ⁿ ‖k̇‖ / (n+1)!."""
    return (2.0 * k_norm) ** n * kdot_norm / math.factorial(n + 1)


def _tail_bound(n_last: int, k_norm: float, kdot_norm: float) -> float:
    total, n = 0.0, n_last + 1
    while True:
        term = series_bound(n, k_norm, kdot_norm)
        total += term
        if term <= 1e-300 or term < 1e-17 * total:
            return total
        n += 1


def ad_series(
    k: HSKernel, kdot: HSKernel, tol: float = SERIES_TOL, n_max: int = SERIES_MAX_TERMS
) -> ADSeries:
    """
    Expands (i∂_t T*)T = i Σ_n (-1)^{n+1}/(n+1)! ad_B^n(Ḃ) in Nambu form.

    With h_B = [[0, K], [-K̄, 0]] and h_0 = [[0, K̇], [-conj K̇, 0]], the
    commutator acts as h_{n+1} = h_B Σ h_n - h_n Σ h_B, Σ = diag(1, -1).
    Even n carry pair terms, odd n number-type terms. Terms are added until
    2ⁿ‖k‖ⁿ‖k̇‖/(n+1)! < tol.

    Raises:
        TruncationError: If the bound is still above tol at n_max.
    """
    if k.grid != kdot.grid:
        raise ContractViolationError("k and kdot live on different grids.")
    M, w = k.grid.mode_count, k.weight
    k_op, kdot_op = k.operator, kdot.operator
    k_norm, kdot_norm = k.hs_norm, kdot.hs_norm

    zeros = np.zeros((M, M), dtype=np.complex128)
    h_b = np.block([[zeros, k_op], [-k_op.conj(), zeros]])
    sigma = np.concatenate([np.ones(M), -np.ones(M)])
    h_n = np.block([[zeros, kdot_op], [-kdot_op.conj(), zeros]])
    total = np.zeros((2 * M, 2 * M), dtype=np.complex128)

    terms: List[ADSeriesTerm] = []
    n = 0
    while True:
        if n % 2 == 0:
            f1, f2, parity = h_n[:M, M:] / w, -h_n[M:, :M] / w, "even"
        else:
            f1, f2, parity = h_n[:M, :M] / w, h_n[M:, M:] / w, "odd"
        terms.append(
            ADSeriesTerm(
                n=n,
                f1=HSKernel(k.grid, f1, kind=f"f_{n},1"),
                f2=HSKernel(k.grid, f2, kind=f"f_{n},2"),
                parity=parity,
            )
        )
        total += (-1.0) ** (n + 1) / math.factorial(n + 1) * h_n
        if series_bound(n, k_norm, kdot_norm) < tol:
            break
        if n >= n_max:
            residual = _tail_bound(n, k_norm, kdot_norm)
            raise TruncationError(
                f"ad-series did not reach tolerance {tol:.0e} within {n_max} terms.",
                residual_bound=residual,
            )
        h_n = h_b @ (sigma[:, None] * h_n) - h_n @ (sigma[:, None] * h_b)
        n += 1

    builder = GeneratorBuilder(M, w)
    builder.add_nambu(1j * total)
    residual = _tail_bound(n, k_norm, kdot_norm)
    generator = builder.build(truncation_residual=residual, meta={"ad_series_terms": n + 1})
    return ADSeries(terms=terms, generator=generator, residual_bound=residual)


@dataclass(frozen=True)
class _Columns:
    """Column matrices of the kernel families entering the displays."""

    C: np.ndarray
    S: np.ndarray
    P: np.ndarray
    K: np.ndarray
    Dp: np.ndarray
    Dr: np.ndarray
    Gp: Tuple[np.ndarray, ...]
    Gk: Tuple[np.ndarray, ...]


def _columns(family: HyperbolicFamily, derivs: DerivativeKernels) -> _Columns:
    return _Columns(
        C=family.c.operator,
        S=family.s.operator,
        P=family.p.operator,
        K=family.k.operator,
        Dp=-derivs.lap1_p.operator.conj().T,
        Dr=-derivs.lap1_r.operator.T,
        Gp=tuple(g.operator.conj().T for g in derivs.grad1_p),
        Gk=tuple(g.operator.T for g in derivs.grad1_k),
    )


def assemble_LK(family: HyperbolicFamily, derivs: DerivativeKernels) -> QuadGenerator:
    """
    Kinetic block: ∫∇a*∇a plus the Bogoliubov-rotated kinetic terms.

    The display pairs a*(-Δr_x) a(k_x) with a*(s_x) a(-Δr_x); its Hermitian
    part is assembled.
    """
    grid = family.k.grid
    M = grid.mode_count
    identity = np.eye(M, dtype=np.complex128)
    col = _columns(family, derivs)
    builder = GeneratorBuilder(M, grid.weight)

    builder.add_matrix(kinetic_matrix(grid))
    builder.creation_annihilation(identity, col.Dp)
    builder.creation_annihilation(col.Dp, identity)
    for grad_p in col.Gp:
        builder.creation_annihilation(grad_p, grad_p)
    for grad_k in col.Gk:
        builder.creation_annihilation(grad_k, grad_k)

    half = 0.5 * identity
    builder.creation_annihilation(col.Dr, col.K, half)
    builder.creation_annihilation(col.K, col.Dr, half)
    builder.creation_annihilation(col.S, col.Dr, half)
    builder.creation_annihilation(col.Dr, col.S, half)

    builder.creation_pair(col.Dp, col.K)
    builder.annihilation_pair(col.K, col.Dp)
    builder.creation_pair(identity, col.Dr)
    builder.annihilation_pair(col.Dr, identity)
    builder.creation_pair(col.P, col.Dr)
    builder.annihilation_pair(col.Dr, col.P)
    return builder.build(meta={"block": "kinetic"})


def interaction_matrix(scat: RadialScattering, grid: Grid) -> np.ndarray:
    """
    N^{3β} V(N^β |x_i - x_j|), rescaled so every row integrates to b0.

    Raises:
        ResolutionError: If the interaction range is below two grid cells.
    """
    check_resolvable(grid, scat)
    distances = pair_geometry(grid).distances
    pair = scat.N ** (3.0 * scat.beta) * scat.potential(scat.N**scat.beta * distances)
    row_integral = grid.weight * float(np.sum(pair[0]))
    if row_integral > 0:
        pair = pair * (scat.potential.b0 / row_integral)
    return pair


@dataclass(frozen=True, eq=False)
class InteractionWeights:
    """
    Integration weights of the potential block.

    `density` is (V * |φ|²)(x); `exchange`, `pair` and `pair_conj` are the
    operator forms of V φ(x)φ̄(y), ½ V φ(x)φ(y) and its conjugate.
    """

    density: np.ndarray
    exchange: np.ndarray
    pair: np.ndarray
    pair_conj: np.ndarray


def pair_interaction_weights(pair_matrix: np.ndarray, phi: GridField) -> InteractionWeights:
    w = phi.grid.weight
    values = phi.flat
    density = w * pair_matrix @ np.abs(values) ** 2
    exchange = w * pair_matrix * np.outer(values, values.conj())
    pair = 0.5 * w * pair_matrix * np.outer(values, values)
    return InteractionWeights(density, exchange, pair, pair.conj())


def contact_interaction_weights(b0: float, phi: GridField) -> InteractionWeights:
    """The b0 δ(x - y) limit of `pair_interaction_weights`."""
    values = phi.flat
    density = b0 * np.abs(values) ** 2
    pair = np.diag(0.5 * b0 * values**2)
    return InteractionWeights(density, np.diag(density), pair, pair.conj())


def assemble_LV(family: HyperbolicFamily, weights: InteractionWeights) -> QuadGenerator:
    """Potential block: the six displayed term groups, already normal-ordered."""
    grid = family.k.grid
    M = grid.mode_count
    identity = np.eye(M, dtype=np.complex128)
    C, S, P = family.c.operator, family.s.operator, family.p.operator
    builder = GeneratorBuilder(M, grid.weight)

    density = weights.density
    builder.creation_annihilation(C, C, density)
    builder.creation_annihilation(S, S, density)
    builder.creation_pair(C, S, density)
    builder.annihilation_pair(S, C, density)

    exchange = weights.exchange
    builder.creation_annihilation(C, C, exchange)
    builder.creation_annihilation(S, S, exchange.T)
    builder.creation_pair(C, S, exchange)
    builder.annihilation_pair(S, C, exchange)

    pair, pair_conj = weights.pair, weights.pair_conj
    builder.creation_annihilation(C, S, 2.0 * pair)
    builder.annihilation_pair(S, S, pair)
    builder.creation_annihilation(S, C, 2.0 * pair_conj)
    builder.creation_pair(S, S, pair_conj)

    builder.creation_pair(P, identity, pair)
    builder.creation_pair(C, P, pair)
    builder.annihilation_pair(P, identity, pair_conj)
    builder.annihilation_pair(C, P, pair_conj)
    return builder.build(meta={"block": "potential"})


def assemble_corrections(profile: Profile, phi: GridField) -> QuadGenerator:
    """
    The ω- and λ-correction pair terms:
    ½ P(x - y) [φΔφ + |∇φ|²]((x + y)/2) and
    κ 1(|x - y| <= l) φ((x + y)/2)², each with its Hermitian conjugate.
    """
    grid = phi.grid
    M, w = grid.mode_count, grid.weight
    identity = np.eye(M, dtype=np.complex128)
    values = phi.values
    mid = midpoint_values(values, grid)
    mid_laplacian = midpoint_values(laplacian(values, grid), grid)
    grad_square = sum(np.abs(midpoint_values(g, grid)) ** 2 for g in gradient(values, grid))
    shape_term = 0.5 * pair_profile_matrix(profile, grid) * (mid * mid_laplacian + grad_square)
    inside = pair_geometry(grid).distances <= profile.ell
    coupling_term = profile.correction_coupling * inside * mid**2

    builder = GeneratorBuilder(M, w)
    for term in (shape_term, coupling_term):
        weight_op = w * 0.5 * (term + term.T)
        builder.creation_pair(identity, identity, weight_op)
        builder.annihilation_pair(identity, identity, weight_op.conj())
    return builder.build(meta={"block": "corrections"})


def eta_N(
    scat: RadialScattering,
    phi: GridField,
    family: HyperbolicFamily,
    N: float,
    beta: float,
    pair_matrix: Optional[np.ndarray] = None,
    derivs: Optional[DerivativeKernels] = None,
) -> float:
    """
    The scalar phase η_N, evaluated line by line with ⟨f, g⟩ = ∫ f̄ g.

    The gradient line reuses `derivs.grad1_s` when the derivative kernels of
    `family` are at hand; otherwise ∇₁s is differentiated here.

    Raises:
        AssemblyError: If the imaginary residue exceeds 1e-10.
    """
    if not (math.isclose(scat.N, N) and math.isclose(scat.beta, beta)):
        raise ContractViolationError("Scattering solution does not match (N, beta).")
    grid = phi.grid
    w = grid.weight
    pair = interaction_matrix(scat, grid) if pair_matrix is None else pair_matrix
    values = phi.flat
    density = np.abs(values) ** 2
    s = family.s.entries
    c = family.c.entries
    f_pair = scat.f(pair_geometry(grid).distances.reshape(-1)).reshape(pair.shape)
    if derivs is None:
        grad1_s = [differentiate_rows(s, grid, symbol) for symbol in gradient_symbols(grid)]
    else:
        grad1_s = [component.entries for component in derivs.grad1_s]

    # ⟨s_x, s_y⟩ and ⟨s_x, c_y⟩ with s_x(y) = s(y, x)
    ss = w * s.conj().T @ s
    sc = w * s.conj().T @ c
    ss_diag = np.real(np.diag(ss))
    potential = w * pair @ density

    lines = [
        N * w**2 * np.sum(pair * (0.5 - f_pair) * np.outer(density, density)),
        w**2 * sum(np.sum(np.abs(component) ** 2) for component in grad1_s),
        w * np.sum(potential * ss_diag),
        w**2 * np.sum(pair * np.outer(values, values.conj()) * ss),
        np.real(w**2 * np.sum(pair * np.outer(values, values) * sc)),
        w**2 / (2.0 * N) * np.sum(
            pair * (np.abs(sc) ** 2 + np.abs(ss) ** 2 + np.outer(ss_diag, ss_diag))
        ),
    ]
    value = complex(sum(lines))
    if abs(value.imag) > PHASE_IMAG_TOL * max(1.0, abs(value)):
        raise AssemblyError(f"η_N has imaginary residue {value.imag:.3e}.")
    return float(value.real)


def _assemble(
    profile: Profile,
    phi: GridField,
    phi_dot: GridField,
    k: HSKernel,
    weights: InteractionWeights,
    tol: float,
    n_max: int,
) -> Tuple[QuadGenerator, HyperbolicFamily, DerivativeKernels]:
    family = hyperbolic(k)
    derivs = derivative_kernels(profile, phi, family)
    kdot = build_kdot(profile, phi, phi_dot)
    series = ad_series(k, kdot, tol=tol, n_max=n_max)
    generator = (
        series.generator
        + assemble_LK(family, derivs)
        + assemble_LV(family, weights)
        + assemble_corrections(profile, phi)
    )
    return generator, family, derivs


def assemble_L2N(
    scat: RadialScattering,
    phi: GridField,
    phi_dot: Optional[GridField] = None,
    tol: float = SERIES_TOL,
    n_max: int = SERIES_MAX_TERMS,
) -> QuadGenerator:
    """
    L_{2,N}(t) at the snapshot φ^N_t.
    The returned phase holds the normal-ordering constants only; η_N is
    reported separately in `eta`.

    Args:
        scat (RadialScattering): Neumann solution for (N, β, l).
        phi (GridField): φ^N_t.
        phi_dot (Optional[GridField]): ∂_t φ^N_t; computed from the Hartree
            equation when omitted.
        tol (float): ad-series truncation tolerance.
        n_max (int): Maximal ad-series order.
    """
    if phi_dot is None:
        phi_dot = time_derivative(phi, HartreeCoupling(phi.grid, scat))
    profile = ScatteringProfile(scat)
    k = build_pair_kernel(profile, phi, kind="k_N")
    pair = interaction_matrix(scat, phi.grid)
    weights = pair_interaction_weights(pair, phi)
    generator, family, derivs = _assemble(profile, phi, phi_dot, k, weights, tol, n_max)
    eta = eta_N(scat, phi, family, scat.N, scat.beta, pair_matrix=pair, derivs=derivs)
    return QuadGenerator(
        A=generator.A,
        B=generator.B,
        phase=generator.phase,
        weight=generator.weight,
        eta=eta,
        truncation_residual=generator.truncation_residual,
        meta={"t": phi.t, "N": scat.N, "beta": scat.beta, "ell": scat.ell, "phase_source": "ad-series odd terms"},
    )


def assemble_L2inf(
    b0: float,
    ell: float,
    phi: GridField,
    phi_dot: Optional[GridField] = None,
    tol: float = SERIES_TOL,
    n_max: int = SERIES_MAX_TERMS,
) -> QuadGenerator:
    """L_{2,∞}(t) at the NLS snapshot φ_t; the interaction collapses to b0 δ."""
    if phi_dot is None:
        phi_dot = time_derivative(phi, LocalCoupling(b0))
    profile = AsymptoticProfile(b0, ell)
    k = build_pair_kernel(profile, phi, kind="k_limit")
    weights = contact_interaction_weights(b0, phi)
    generator, _, _ = _assemble(profile, phi, phi_dot, k, weights, tol, n_max)
    return QuadGenerator(
        A=generator.A,
        B=generator.B,
        phase=generator.phase,
        weight=generator.weight,
        truncation_residual=generator.truncation_residual,
        meta={"t": phi.t, "N": "limit", "b0": b0, "ell": ell, "phase_source": "ad-series odd terms"},
    )


def save_generator(generator: QuadGenerator, directory: str, stem: str) -> None:
    """Writes A and B as raw complex arrays plus a JSON sidecar."""
    save_array(os.path.join(directory, f"{stem}_A.bin"), generator.A)
    save_array(os.path.join(directory, f"{stem}_B.bin"), generator.B)
    sidecar = dict(generator.meta)
    sidecar.update(
        {
            "phase": generator.phase,
            "eta": generator.eta,
            "truncation_residual": generator.truncation_residual,
        }
    )
    save_json(os.path.join(directory, f"{stem}.json"), sidecar)
