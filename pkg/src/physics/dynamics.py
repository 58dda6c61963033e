"""
Bogoliubov frames of quadratic flows.

The Heisenberg evolution of a quadratic generator (A, B) maps
b ↦ U b + V̄ b*, with
    i U' =  A U + B V,
    i V' = -B̄ U - Ā V,
integrated here with classical fourth-order Runge-Kutta.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize

from errors import ContractViolationError, GridMismatchError, IntegrationDivergedError, NumericError
from logger import get_logger
from physics.generator import QuadGenerator

logger = get_logger(task_name="dynamics")

DEFECT_TOL = 1e-6
DIVERGENCE_FACTOR = 100.0
# bound on h‖H‖; RK4 damps a mode of frequency ω by about (hω)⁶/72 per step
RK4_PHASE_STEP = 0.03
STEPS_PER_UNIT_TIME = 20


@dataclass(frozen=True, eq=False)
class BogoliubovFrame:
    """(U, V) at time t in the orthonormal mode basis."""

    U: np.ndarray
    V: np.ndarray
    t: float = 0.0
    weight: float = 1.0

    @property
    def mode_count(self) -> int:
        return self.U.shape[0]


def vacuum_frame(mode_count: int, weight: float = 1.0, t: float = 0.0) -> BogoliubovFrame:
    """U = 1, V = 0."""
    return BogoliubovFrame(
        U=np.eye(mode_count, dtype=np.complex128),
        V=np.zeros((mode_count, mode_count), dtype=np.complex128),
        t=t,
        weight=weight,
    )


def particle_number(frame: BogoliubovFrame) -> float:
    """
    ⟨N⟩ = tr(V V*) in the orthonormal mode basis b_i = √w a(x_i). The
    quadrature weight is already absorbed in the b modes, so no factor of w
    enters.
    """
    return float(np.linalg.norm(frame.V) ** 2)


def second_moment(frame: BogoliubovFrame) -> float:
    """⟨N²⟩ = (tr γ)² + tr γ + tr γ² + ‖α‖², γ = V V*, α = U V*."""
    gamma = frame.V @ frame.V.conj().T
    alpha = frame.U @ frame.V.conj().T
    trace = float(np.real(np.trace(gamma)))
    return trace**2 + trace + float(np.linalg.norm(gamma) ** 2) + float(np.linalg.norm(alpha) ** 2)


def kinetic_energy(frame: BogoliubovFrame, kinetic: np.ndarray) -> float:
    """⟨Σ L_ij b_i* b_j⟩ = Σ L_ij γ_ij."""
    gamma = frame.V @ frame.V.conj().T
    return float(np.real(np.sum(kinetic * gamma)))


def symplectic_defect(frame: BogoliubovFrame) -> float:
    """max(‖U*U - V*V - 1‖, ‖UᵀV - VᵀU‖)."""
    U, V = frame.U, frame.V
    normalization = U.conj().T @ U - V.conj().T @ V - np.eye(frame.mode_count)
    exchange = U.T @ V - V.T @ U
    return float(max(np.linalg.norm(normalization), np.linalg.norm(exchange)))


def compare_frames(a: BogoliubovFrame, b: BogoliubovFrame) -> float:
    """‖U_a - U_b‖ + ‖V_a - V_b‖."""
    if a.U.shape != b.U.shape:
        raise GridMismatchError(f"Frame sizes differ: {a.U.shape} vs {b.U.shape}")
    if not math.isclose(a.t, b.t, rel_tol=1e-12, abs_tol=1e-12):
        raise ContractViolationError(f"Frames are at different times: {a.t} vs {b.t}")
    return float(np.linalg.norm(a.U - b.U) + np.linalg.norm(a.V - b.V))


class GeneratorSchedule:
    """
    Generators assembled at knot times and linearly interpolated in between.

    Args:
        times (Sequence[float]): Strictly increasing knot times.
        generators (Sequence[QuadGenerator]): One generator per knot.
    """

    def __init__(self, times: Sequence[float], generators: Sequence[QuadGenerator]):
        times = np.asarray(times, dtype=float)
        if len(times) != len(generators) or len(times) == 0:
            raise ContractViolationError("Need one generator per knot time.")
        if np.any(np.diff(times) <= 0):
            raise ContractViolationError("Knot times must be strictly increasing.")
        self.times = times
        self.generators = list(generators)
        self.norm_bound = max(
            float(np.linalg.norm(g.A, 2) + np.linalg.norm(g.B, 2)) for g in self.generators
        )

    @classmethod
    def constant(cls, generator: QuadGenerator) -> "GeneratorSchedule":
        return cls([0.0], [generator])

    @staticmethod
    def knot_times(t_start: float, t_end: float, per_unit_time: int = STEPS_PER_UNIT_TIME) -> np.ndarray:
        count = max(1, int(math.ceil((t_end - t_start) * per_unit_time - 1e-9)))
        return np.linspace(t_start, t_end, count + 1)

    def __call__(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        times = self.times
        if len(times) == 1 or t <= times[0]:
            first = self.generators[0]
            return first.A, first.B
        if t >= times[-1]:
            last = self.generators[-1]
            return last.A, last.B
        index = int(np.searchsorted(times, t, side="right")) - 1
        left, right = self.generators[index], self.generators[index + 1]
        theta = (t - times[index]) / (times[index + 1] - times[index])
        return (1 - theta) * left.A + theta * right.A, (1 - theta) * left.B + theta * right.B

    def reversed(self, t_final: float) -> "GeneratorSchedule":
        """Schedule of -H(t_final - s), which undoes the forward flow on [0, t_final]."""
        generators = [
            QuadGenerator(-g.A, -g.B, -g.phase, g.weight, meta=dict(g.meta))
            for g in reversed(self.generators)
        ]
        return GeneratorSchedule(t_final - self.times[::-1], generators)


GeneratorSource = Union[GeneratorSchedule, Callable[[float], QuadGenerator]]


def _as_schedule(gen_at: GeneratorSource, t0: float) -> Tuple[Callable, float]:
    if isinstance(gen_at, GeneratorSchedule):
        return gen_at, gen_at.norm_bound
    first = gen_at(t0)

    def blocks(t: float) -> Tuple[np.ndarray, np.ndarray]:
        generator = gen_at(t)
        return generator.A, generator.B

    return blocks, float(np.linalg.norm(first.A, 2) + np.linalg.norm(first.B, 2))


def _rhs(blocks: Callable, t: float, U: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    A, B = blocks(t)
    return -1j * (A @ U + B @ V), 1j * (B.conj() @ U + A.conj() @ V)


def _rk4_step(blocks: Callable, t: float, h: float, U: np.ndarray, V: np.ndarray):
    k1u, k1v = _rhs(blocks, t, U, V)
    k2u, k2v = _rhs(blocks, t + 0.5 * h, U + 0.5 * h * k1u, V + 0.5 * h * k1v)
    k3u, k3v = _rhs(blocks, t + 0.5 * h, U + 0.5 * h * k2u, V + 0.5 * h * k2v)
    k4u, k4v = _rhs(blocks, t + h, U + h * k3u, V + h * k3v)
    return (
        U + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
        V + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


@dataclass
class ObservableSeries:
    """Observables of a frame trajectory sampled at `times`."""

    times: List[float] = field(default_factory=list)
    particle_number: List[float] = field(default_factory=list)
    second_moment: List[float] = field(default_factory=list)
    symplectic_defect: List[float] = field(default_factory=list)
    generator_norms: List[float] = field(default_factory=list)
    kinetic_energy: Optional[List[float]] = None

    def record(self, frame: BogoliubovFrame, generator_norm: float, kinetic: Optional[np.ndarray]) -> None:
        self.times.append(frame.t)
        self.particle_number.append(particle_number(frame))
        self.second_moment.append(second_moment(frame))
        self.symplectic_defect.append(symplectic_defect(frame))
        self.generator_norms.append(generator_norm)
        if kinetic is not None:
            if self.kinetic_energy is None:
                self.kinetic_energy = []
            self.kinetic_energy.append(kinetic_energy(frame, kinetic))

    def to_dataframe(self) -> pd.DataFrame:
        data = {
            "t": self.times,
            "particle_number": self.particle_number,
            "second_moment": self.second_moment,
            "defect": self.symplectic_defect,
            "generator_norm": self.generator_norms,
        }
        if self.kinetic_energy is not None:
            data["kinetic_energy"] = self.kinetic_energy
        return pd.DataFrame(data)


def evolve_frame(
    frame0: BogoliubovFrame,
    gen_at: GeneratorSource,
    t_final: float,
    dt: float,
    sample_times: Optional[Sequence[float]] = None,
    tol: float = DEFECT_TOL,
    kinetic: Optional[np.ndarray] = None,
) -> Tuple[List[BogoliubovFrame], ObservableSeries]:
    """
    Integrates the frame from frame0.t to t_final with RK4.

    The step is the largest h <= dt that divides each sampling interval and
    keeps h‖H‖ <= RK4_PHASE_STEP. The symplectic defect is
    checked after every step.

    Args:
        frame0 (BogoliubovFrame): Initial frame.
        gen_at: GeneratorSchedule or callable t -> QuadGenerator.
        t_final (float): End time.
        dt (float): Maximal step.
        sample_times (Optional[Sequence[float]]): Output times in
            [frame0.t, t_final]; defaults to the two endpoints.
        tol (float): Defect tolerance; 100x this aborts the run.
        kinetic (Optional[np.ndarray]): Kinetic matrix for ⟨K⟩.

    Returns:
        Frames at the sample times and the observable series.

    Raises:
        IntegrationDivergedError: If the defect exceeds 100 * tol.
    """
    if dt <= 0:
        raise ContractViolationError(f"dt must be positive. Given {dt}")
    t0 = frame0.t
    if t_final < t0:
        raise ContractViolationError(f"t_final={t_final} precedes the initial time {t0}.")
    samples = [t0, t_final] if sample_times is None else sorted(set([t0] + [float(t) for t in sample_times]))
    if samples[-1] > t_final + 1e-12 or samples[0] < t0:
        raise ContractViolationError("Sample times must lie in [frame0.t, t_final].")

    blocks, norm_bound = _as_schedule(gen_at, t0)
    max_step = min(dt, RK4_PHASE_STEP / norm_bound) if norm_bound > 0 else dt
    if max_step < dt:
        logger.info(f"Step reduced from {dt:.3e} to {max_step:.3e} to keep RK4 phase error small.")

    series = ObservableSeries()
    U, V = frame0.U.astype(np.complex128), frame0.V.astype(np.complex128)
    current = frame0
    frames = [frame0]
    series.record(frame0, _block_norm(blocks, t0), kinetic)
    warned = False
    for start, end in zip(samples[:-1], samples[1:]):
        steps = max(1, int(math.ceil((end - start) / max_step - 1e-9)))
        h = (end - start) / steps
        t = start
        for step in range(steps):
            U, V = _rk4_step(blocks, t, h, U, V)
            t = start + (step + 1) * h
            defect = symplectic_defect(BogoliubovFrame(U, V, t, frame0.weight))
            if not np.isfinite(defect) or defect > DIVERGENCE_FACTOR * tol:
                raise IntegrationDivergedError(
                    f"Symplectic defect {defect:.3e} exceeds {DIVERGENCE_FACTOR * tol:.1e} at t={t:.6g}.",
                    time=t,
                )
            if defect > tol and not warned:
                logger.warning(f"Symplectic defect {defect:.3e} above {tol:.1e} at t={t:.6g}.")
                warned = True
        current = BogoliubovFrame(U.copy(), V.copy(), end, frame0.weight)
        frames.append(current)
        series.record(current, _block_norm(blocks, end), kinetic)
    return frames, series


def _block_norm(blocks: Callable, t: float) -> float:
    A, B = blocks(t)
    return float(math.sqrt(np.linalg.norm(A) ** 2 + np.linalg.norm(B) ** 2))


def single_mode_squeeze(b: float, t: float) -> BogoliubovFrame:
    """Closed-form frame of A = 0, B = b: U = cosh(bt), V = i sinh(bt)."""
    return BogoliubovFrame(
        U=np.array([[math.cosh(b * t)]], dtype=np.complex128),
        V=np.array([[1j * math.sinh(b * t)]], dtype=np.complex128),
        t=t,
    )


@dataclass(frozen=True)
class GrowthReport:
    """
    Envelope fit log(1 + ⟨N⟩) = log C + c1 exp(c2 t).

    `max_relative_error` compares exp(fit) with 1 + ⟨N⟩.
    """

    max_particle_number: float
    monotone_fraction: float
    log_c: float
    c1: float
    c2: float
    max_relative_error: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "max_particle_number": self.max_particle_number,
            "monotone_fraction": self.monotone_fraction,
            "log_c": self.log_c,
            "c1": self.c1,
            "c2": self.c2,
            "max_relative_error": self.max_relative_error,
        }


def _envelope_fit(times: np.ndarray, target: np.ndarray, rate: float) -> Tuple[np.ndarray, float]:
    design = np.column_stack([np.ones_like(times), np.exp(rate * times)])
    coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.sum((design @ coefficients - target) ** 2))
    return coefficients, residual


def growth_report(series: ObservableSeries) -> GrowthReport:
    """
    Summarizes the growth of ⟨N⟩ and fits the double-exponential envelope.

    Raises:
        ContractViolationError: If ⟨N⟩(0) != 0 (series not from the vacuum).
        NumericError: If any value is not finite.
    """
    times = np.asarray(series.times, dtype=float)
    numbers = np.asarray(series.particle_number, dtype=float)
    if not np.all(np.isfinite(numbers)):
        raise NumericError("Particle number series contains non-finite values.")
    if abs(numbers[0]) > 1e-10:
        raise ContractViolationError(f"Series must start from the vacuum; ⟨N⟩(0) = {numbers[0]:.3e}")
    increments = np.diff(numbers)
    monotone = float(np.mean(increments >= -1e-12)) if increments.size else 1.0
    if np.all(numbers == 0) or times.size < 3:
        return GrowthReport(float(numbers.max()), monotone, 0.0, 0.0, 0.0, 0.0)

    target = np.log1p(numbers)
    search = optimize.minimize_scalar(
        lambda rate: _envelope_fit(times, target, rate)[1],
        bounds=(1e-3, 20.0),
        method="bounded",
    )
    rate = float(search.x)
    (log_c, c1), _ = _envelope_fit(times, target, rate)
    fitted = np.exp(log_c + c1 * np.exp(rate * times))
    relative = np.abs(fitted - (1.0 + numbers)) / (1.0 + numbers)
    return GrowthReport(
        max_particle_number=float(numbers.max()),
        monotone_fraction=monotone,
        log_c=float(log_c),
        c1=float(c1),
        c2=rate,
        max_relative_error=float(relative.max()),
    )
