"""
Radial scattering problems for the rescaled pair potential.

The Neumann ground state f_{N,l} of -Δ + (1/2) N^{3β-1} V(N^β ·) on the ball
of radius l is computed through u = r f, which turns the problem into a
one-dimensional Sturm-Liouville problem with u(0) = 0. Inside the rescaled
support the equation is integrated numerically; outside it the potential
vanishes and the solution is written down in closed form.
"""
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, optimize

from errors import (
    ContractViolationError,
    InvalidPotentialError,
    ResolutionError,
    SingularityError,
    SolverConvergenceError,
)
from logger import get_logger
from utils import save_dataframe_as_csv, save_json

logger = get_logger(task_name="scattering")

QUADRATURE_RTOL = 1e-10
ODE_RTOL = 1e-12
ODE_ATOL = 1e-14
BOUNDARY_RESIDUAL_TOL = 1e-8
MIN_SUPPORT_POINTS = 8
BRACKET_SCAN_POINTS = 400


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """
    A non-negative, spherically symmetric, compactly supported potential.

    Attributes:
        name (str): Short identifier (used in output metadata).
        profile (Callable): Vectorized radial profile r -> V(r). Values for
            r > support_radius are ignored.
        support_radius (float): R, with V(r) = 0 for r > R.
        strength (float): Amplitude parameter the profile was built with.
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    strength: float = 1.0

    def __post_init__(self):
        radius = self.support_radius
        if not np.isfinite(radius) or radius <= 0:
            raise InvalidPotentialError(
                f"Support radius must be positive and finite. Given {radius}"
            )
        trial = np.linspace(0.0, radius, 513)
        with np.errstate(all="ignore"):
            values = np.asarray(self.profile(trial), dtype=float)
        if values.shape != trial.shape:
            raise InvalidPotentialError(
                f"Potential '{self.name}' profile must be vectorized."
            )
        if not np.all(np.isfinite(values)):
            raise InvalidPotentialError(
                f"Potential '{self.name}' has non-finite values inside its support."
            )
        if np.any(values < 0):
            raise InvalidPotentialError(
                f"Potential '{self.name}' must be non-negative. "
                f"Minimum sampled value: {values.min():.3e}"
            )

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            values = np.asarray(self.profile(r), dtype=float)
        return np.where(r <= self.support_radius, values, 0.0)

    @cached_property
    def b0(self) -> float:
        """∫V dx, cached."""
        return integrate_b0(self)

    @cached_property
    def max_value(self) -> float:
        trial = np.linspace(0.0, self.support_radius, 4097)
        return float(np.max(self(trial)))

    @property
    def is_zero(self) -> bool:
        return self.max_value == 0.0


def square_well(v0: float = 1.0, radius: float = 1.0) -> PotentialSpec:
    """V(r) = v0 for r <= radius."""
    return PotentialSpec(
        name="square_well",
        profile=lambda r: np.full_like(np.asarray(r, dtype=float), v0),
        support_radius=radius,
        strength=v0,
    )


def parabolic(v0: float = 1.0, radius: float = 1.0) -> PotentialSpec:
    """V(r) = v0 (1 - r²/R²) for r <= R."""
    return PotentialSpec(
        name="parabolic",
        profile=lambda r: v0 * (1.0 - (np.asarray(r, dtype=float) / radius) ** 2),
        support_radius=radius,
        strength=v0,
    )


def smooth_bump(v0: float = 1.0, radius: float = 1.0) -> PotentialSpec:
    """V(r) = v0 exp(1 - 1/(1 - r²/R²)) for r < R, a C^∞ bump with V(0) = v0."""

    def profile(r):
        x2 = (np.asarray(r, dtype=float) / radius) ** 2
        inside = x2 < 1.0
        safe = np.where(inside, 1.0 - x2, 1.0)
        return np.where(inside, v0 * np.exp(1.0 - 1.0 / safe), 0.0)

    return PotentialSpec(
        name="smooth_bump", profile=profile, support_radius=radius, strength=v0
    )


def zero_potential(radius: float = 1.0) -> PotentialSpec:
    """V ≡ 0 (with a nominal support radius)."""
    return PotentialSpec(
        name="zero",
        profile=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        support_radius=radius,
        strength=0.0,
    )


POTENTIAL_FACTORIES = {
    "square_well": square_well,
    "parabolic": parabolic,
    "smooth_bump": smooth_bump,
}


def potential_from_config(shape: str, strength: float, radius: float) -> PotentialSpec:
    """Builds a potential from its configuration triple."""
    if shape == "zero" or strength == 0.0:
        return zero_potential(radius)
    if shape not in POTENTIAL_FACTORIES:
        raise InvalidPotentialError(
            f"Unknown potential shape '{shape}'. "
            f"Allowed: {sorted(POTENTIAL_FACTORIES) + ['zero']}"
        )
    return POTENTIAL_FACTORIES[shape](strength, radius)


def integrate_b0(potential: PotentialSpec) -> float:
    """
    Returns b0 = ∫V dx = 4π ∫_0^R r² V(r) dr by adaptive quadrature.

    Args:
        potential (PotentialSpec): The potential.

    Returns:
        float: b0 >= 0.

    Raises:
        InvalidPotentialError: If the integrand is not finite.
    """
    value, abserr = integrate.quad(
        lambda r: 4.0 * math.pi * r * r * float(potential(r)),
        0.0,
        potential.support_radius,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    if not np.isfinite(value):
        raise InvalidPotentialError(
            f"Potential '{potential.name}' has a non-finite integral."
        )
    if value > 0 and abserr > QUADRATURE_RTOL * value:
        logger.warning(
            f"b0 quadrature error estimate {abserr:.2e} exceeds relative "
            f"tolerance {QUADRATURE_RTOL:.0e}."
        )
    return float(value)


def omega_asymp(b0: float, ell: float, r):
    """
    The limit profile (b0/8π)[1/r - 3/(2l) + r²/(2l³)] for r <= l, else 0.

    Args:
        b0 (float): ∫V.
        ell (float): Neumann radius l.
        r: Radius or array of radii; all must be positive.

    Returns:
        Same shape as r.

    Raises:
        SingularityError: If any r <= 0.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise SingularityError("omega_asymp is singular at r = 0.")
    values = np.where(
        r_arr <= ell,
        b0 / (8.0 * math.pi) * (1.0 / r_arr - 1.5 / ell + r_arr**2 / (2.0 * ell**3)),
        0.0,
    )
    return float(values) if np.ndim(r) == 0 else values


def omega_asymp_derivative(b0: float, ell: float, r):
    """Radial derivative of `omega_asymp` (zero for r > l)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise SingularityError("omega_asymp is singular at r = 0.")
    values = np.where(
        r_arr <= ell,
        b0 / (8.0 * math.pi) * (-1.0 / r_arr**2 + r_arr / ell**3),
        0.0,
    )
    return float(values) if np.ndim(r) == 0 else values


def omega_asymp_ball_average(b0: float, ell: float, h: float) -> float:
    """Average of `omega_asymp` over a ball of radius h <= l around the origin."""
    if h <= 0 or h > ell:
        raise ContractViolationError(f"Ball radius must lie in (0, l]. Given {h}")
    return b0 / (8.0 * math.pi) * (1.5 / h - 1.5 / ell + 0.3 * h**2 / ell**3)


class RadialScattering:
    """
    The Neumann ground state f_{N,l}, its eigenvalue and ω = 1 - f.

    f is available on the stored radial grid (`r_grid`, `f_values`,
    `df_values`) and at arbitrary radii through `f`, `df`, `omega`.
    By convention f = 1 and ω = 0 for r >= l.
    """

    def __init__(
        self,
        potential: PotentialSpec,
        N: float,
        beta: float,
        ell: float,
        lam: float,
        r_grid: np.ndarray,
        interior: Optional[Callable[[np.ndarray], np.ndarray]],
        u_support: float,
        du_support: float,
        scale: float,
    ):
        self.potential = potential
        self.N = float(N)
        self.beta = float(beta)
        self.ell = float(ell)
        self.lam = float(lam)
        self.support = potential.support_radius * self.N ** (-self.beta)
        self._interior = interior
        self._u_support = u_support
        self._du_support = du_support
        self._scale = scale
        self.r_grid = np.asarray(r_grid, dtype=float)
        self.f_values = self.f(self.r_grid)
        self.f_values[-1] = 1.0
        self.df_values = self.df(self.r_grid)

    def _exterior(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        k = math.sqrt(max(self.lam, 0.0))
        s = r - self.support
        u = self._u_support * np.cos(k * s) + self._du_support * s * np.sinc(
            k * s / math.pi
        )
        du = -self._u_support * k * np.sin(k * s) + self._du_support * np.cos(k * s)
        return u, du

    def _u(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = np.empty_like(r)
        du = np.empty_like(r)
        inside = r < self.support
        if self._interior is None:
            u[inside], du[inside] = r[inside], 1.0
        elif np.any(inside):
            y = self._interior(r[inside])
            u[inside], du[inside] = y[0], y[1]
        u[~inside], du[~inside] = self._exterior(r[~inside])
        return u, du

    def f(self, r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        values = np.ones_like(r_arr)
        active = r_arr < self.ell
        positive = active & (r_arr > 0)
        u, _ = self._u(r_arr[positive])
        values[positive] = self._scale * u / r_arr[positive]
        values[active & (r_arr <= 0)] = self._scale
        return float(values[0]) if np.ndim(r) == 0 else values

    def df(self, r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        values = np.zeros_like(r_arr)
        positive = (r_arr < self.ell) & (r_arr > 0)
        u, du = self._u(r_arr[positive])
        rp = r_arr[positive]
        values[positive] = self._scale * (du * rp - u) / rp**2
        return float(values[0]) if np.ndim(r) == 0 else values

    def omega(self, r):
        return 1.0 - self.f(r)

    def domega(self, r):
        return -self.df(r)

    def omega_ball_average(self, h: float) -> float:
        """Average of ω over a ball of radius h around the origin."""
        points = [self.support] if self.support < h else None
        value, _ = integrate.quad(
            lambda s: s * s * float(self.omega(s)),
            0.0,
            h,
            points=points,
            epsabs=1e-14,
            epsrel=1e-10,
            limit=200,
        )
        return 3.0 * value / h**3

    @property
    def omega_values(self) -> np.ndarray:
        return 1.0 - self.f_values

    @property
    def boundary_residual(self) -> float:
        """|f'(l)| computed from the solution at l."""
        return abs(float(self.df(self.ell * (1.0 - 1e-15))))

    def coupling_integral(self) -> float:
        """∫ N^{3β} V(N^β x) f_{N,l}(x) dx, i.e. 4π ∫ t² V(t) f(t N^{-β}) dt."""
        if self.potential.is_zero:
            return 0.0
        shrink = self.N ** (-self.beta)
        value, _ = integrate.quad(
            lambda t: 4.0 * math.pi * t * t * float(self.potential(t))
            * float(self.f(t * shrink)),
            0.0,
            self.potential.support_radius,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        return float(value)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.r_grid, "f": self.f_values})


def _radial_grid(support: float, ell: float, n_grid: int) -> np.ndarray:
    n_inside = n_grid // 2
    if n_inside < MIN_SUPPORT_POINTS:
        raise ResolutionError(
            f"n_grid={n_grid} puts {n_inside} points inside the rescaled support; "
            f"at least {MIN_SUPPORT_POINTS} are required."
        )
    inside = support * np.geomspace(1e-4, 1.0, n_inside, endpoint=False)
    outside = np.geomspace(support, ell, n_grid - n_inside)
    return np.concatenate([inside, outside])


def _interior_solution(potential, N, beta, lam, support, dense=False):
    coupling = 0.5 * N ** (3.0 * beta - 1.0)
    stretch = N**beta

    def rhs(r, y):
        return [y[1], (coupling * float(potential(stretch * r)) - lam) * y[0]]

    result = integrate.solve_ivp(
        rhs,
        (0.0, support),
        [0.0, 1.0],
        method="DOP853",
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
        dense_output=dense,
    )
    if not result.success:
        raise SolverConvergenceError(f"Interior integration failed: {result.message}")
    return result


def solve_neumann(
    potential: PotentialSpec, N: float, beta: float, ell: float, n_grid: int = 2000
) -> RadialScattering:
    """
    Solves the Neumann ground-state problem for the rescaled potential.

    Finds the lowest λ with -u'' + (1/2) N^{3β-1} V(N^β r) u = λ u, u(0) = 0,
    and l u'(l) = u(l) (i.e. f'(l) = 0), then normalizes f(l) = 1.

    Args:
        potential (PotentialSpec): The unscaled potential V.
        N (float): Particle number parameter.
        beta (float): Scaling exponent in (0, 1).
        ell (float): Neumann radius l.
        n_grid (int): Radial grid size; half of it lies inside the support.

    Returns:
        RadialScattering: The solved instance.

    Raises:
        ContractViolationError: If R N^{-β} >= l or parameters are out of range.
        ResolutionError: If fewer than 8 grid points fall inside the support.
        SolverConvergenceError: If no nodeless eigenfunction is bracketed.
    """
    if not 0.0 < beta < 1.0:
        raise ContractViolationError(f"beta must lie in (0, 1). Given {beta}")
    if N <= 0:
        raise ContractViolationError(f"N must be positive. Given {N}")
    support = potential.support_radius * N ** (-beta)
    if support >= ell:
        raise ContractViolationError(
            f"Rescaled support R N^-beta = {support:.4g} must be smaller than "
            f"l = {ell}."
        )
    r_grid = _radial_grid(support, ell, n_grid)

    if potential.is_zero:
        return RadialScattering(
            potential, N, beta, ell, 0.0, r_grid, None, support, 1.0, 1.0
        )

    def endpoint(lam: float) -> Tuple[float, float]:
        result = _interior_solution(potential, N, beta, lam, support)
        return result.y[0, -1], result.y[1, -1]

    def shoot(lam: float) -> float:
        u_a, du_a = endpoint(lam)
        trial = RadialScattering.__new__(RadialScattering)
        trial.lam, trial.support = lam, support
        trial._u_support, trial._du_support = u_a, du_a
        u, du = RadialScattering._exterior(trial, np.array([ell]))
        return float(ell * du[0] - u[0])

    lam_variational = 3.0 * potential.b0 / (8.0 * math.pi * N * ell**3)
    lam_max = 2.0 * 0.5 * N ** (3.0 * beta - 1.0) * potential.max_value
    g_low = shoot(0.0)
    if g_low <= 0:
        raise SolverConvergenceError(
            "Boundary residual does not change sign from λ = 0; the potential "
            "is not repulsive enough to bracket a ground state."
        )
    bracket = None
    if shoot(lam_variational) < 0:
        bracket = (0.0, lam_variational)
    else:
        scan = np.geomspace(lam_variational, max(lam_max, 2 * lam_variational), BRACKET_SCAN_POINTS)
        previous = lam_variational
        for lam in scan[1:]:
            if shoot(lam) < 0:
                bracket = (previous, lam)
                break
            previous = lam
    if bracket is None:
        raise SolverConvergenceError(
            f"No eigenvalue found in [0, {lam_max:.4g}] for N={N}, beta={beta}."
        )

    lam = optimize.brentq(
        shoot, bracket[0], bracket[1], xtol=1e-15 * bracket[1], rtol=1e-15, maxiter=500
    )
    interior = _interior_solution(potential, N, beta, lam, support, dense=True)
    u_a, du_a = interior.y[0, -1], interior.y[1, -1]

    samples_inside = support * np.linspace(1e-6, 1.0, 257)
    trial = RadialScattering(
        potential, N, beta, ell, lam, r_grid, interior.sol, u_a, du_a, 1.0
    )
    u_inside, _ = trial._u(samples_inside)
    u_outside, _ = trial._u(np.linspace(support, ell, 257))
    if np.any(u_inside <= 0) or np.any(u_outside <= 0):
        raise SolverConvergenceError(
            f"Eigenfunction at λ={lam:.6g} has a node; not the ground state."
        )
    u_ell = float(u_outside[-1])

    solution = RadialScattering(
        potential, N, beta, ell, lam, r_grid, interior.sol, u_a, du_a, ell / u_ell
    )
    if solution.boundary_residual > BOUNDARY_RESIDUAL_TOL:
        raise SolverConvergenceError(
            f"Boundary derivative residual {solution.boundary_residual:.2e} "
            f"exceeds {BOUNDARY_RESIDUAL_TOL:.0e}."
        )
    logger.info(f"Neumann problem solved: N={N:g}, beta={beta:g}, lambda={lam:.10e}")
    return solution


@dataclass(frozen=True)
class BoundReport:
    """Empirical constants of the pointwise and eigenvalue bounds."""

    c0: float
    c_lambda: float
    c_omega: float
    c_grad: float
    variational_gap: float

    def as_dict(self) -> dict:
        return {
            "c0": self.c0,
            "c_lambda": self.c_lambda,
            "c_omega": self.c_omega,
            "c_grad": self.c_grad,
            "variational_gap": self.variational_gap,
        }


def check_lemma_bounds(sol: RadialScattering, b0: float) -> BoundReport:
    """
    Measures the constants in the eigenvalue and pointwise ω bounds.

    c0 = min f,
    C_λ = N^{2-β} |λ - 3b0/(8πN l³)|,
    C_ω = sup_r N (r + N^{-β}) ω(r),
    C_∇ = sup_r N (r² + N^{-2β}) |ω'(r)|.
    """
    N, beta, r = sol.N, sol.beta, sol.r_grid
    lam_variational = 3.0 * b0 / (8.0 * math.pi * N * sol.ell**3)
    report = BoundReport(
        c0=float(np.min(sol.f_values)),
        c_lambda=float(N ** (2.0 - beta) * abs(sol.lam - lam_variational)),
        c_omega=float(np.max(N * (r + N ** (-beta)) * sol.omega_values)),
        c_grad=float(np.max(N * (r**2 + N ** (-2.0 * beta)) * np.abs(sol.df_values))),
        variational_gap=float(lam_variational - sol.lam),
    )
    if not all(np.isfinite(list(report.as_dict().values()))):
        raise SolverConvergenceError(f"Non-finite bound constants: {report}")
    return report


def scattering_length(
    potential: PotentialSpec, domain_radius: float, n_grid: int = 2000
) -> float:
    """
    Scattering length a0 of V from the zero-energy equation [-Δ + V/2] f = 0.

    The radial equation is integrated through the support; beyond it u = r f
    is linear and a0 is read off the exterior fit f = 1 - a0/r.

    Args:
        potential (PotentialSpec): The potential.
        domain_radius (float): Outer radius, at least 10 R.
        n_grid (int): Number of radial samples; half fall inside the support.

    Returns:
        float: a0.
    """
    radius = potential.support_radius
    if domain_radius < 10.0 * radius:
        raise ContractViolationError(
            f"domain_radius must be at least 10 R = {10 * radius}. Given {domain_radius}"
        )
    r_grid = _radial_grid(radius, domain_radius, n_grid)
    if potential.is_zero:
        return 0.0

    result = integrate.solve_ivp(
        lambda r, y: [y[1], 0.5 * float(potential(r)) * y[0]],
        (0.0, radius),
        [0.0, 1.0],
        method="DOP853",
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not result.success:
        raise SolverConvergenceError(f"Zero-energy integration failed: {result.message}")
    u_r, du_r = result.y[0, -1], result.y[1, -1]

    exterior = r_grid[r_grid >= radius]
    u_exterior = u_r + du_r * (exterior - radius)
    slope, intercept = np.polyfit(exterior, u_exterior, 1)
    return float(-intercept / slope)


def omega_difference_bound(sol: RadialScattering, b0: float) -> float:
    """sup over r in (R N^{-β}, l] of N^{1-β} r |N ω(r) - ω_asymp(r)|."""
    r = sol.r_grid[sol.r_grid > sol.support]
    if r.size == 0:
        return 0.0
    difference = np.abs(sol.N * sol.omega(r) - omega_asymp(b0, sol.ell, r))
    return float(np.max(sol.N ** (1.0 - sol.beta) * r * difference))


def coupling_defect(sol: RadialScattering, b0: float) -> float:
    """|∫ N^{3β} V(N^β x) f(x) dx - b0|."""
    return abs(sol.coupling_integral() - b0)


def save_radial_scattering(
    sol: RadialScattering, b0: float, directory: str, stem: str = "radial"
) -> str:
    """
    Writes the (r, f) table as CSV with a JSON sidecar.

    Returns:
        str: Path of the CSV file.
    """
    csv_path = os.path.join(directory, f"{stem}.csv")
    save_dataframe_as_csv(sol.to_dataframe(), csv_path)
    save_json(
        os.path.join(directory, f"{stem}.json"),
        {
            "lambda": sol.lam,
            "ell": sol.ell,
            "N": sol.N,
            "beta": sol.beta,
            "b0": b0,
            "potential": sol.potential.name,
        },
    )
    return csv_path
