import math
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from errors import NumericError
from experiments.rate_fit import fit_rate
from experiments.studies import write_outputs
from logger import get_logger
from physics.dynamics import (
    GeneratorSchedule,
    compare_frames,
    evolve_frame,
    particle_number,
    single_mode_squeeze,
    vacuum_frame,
)
from physics.fields import Grid, gaussian_condensate
from physics.generator import QuadGenerator, ad_series, assemble_L2inf, assemble_L2N
from physics.kernels import (
    HSKernel,
    hyperbolic,
    hyperbolic_series,
    kernel_distance,
    verify_bogoliubov_identity,
)
from physics.scattering import solve_neumann
from schema.experiment_schema import ExperimentSchema
from utils import run_in_parallel

logger = get_logger(task_name="suite")

IDENTITY_TOL = 1e-8
SERIES_AGREEMENT_TOL = 1e-10
AD_SERIES_SLACK = 1e-12
SQUEEZE_RTOL = 1e-4
SQUEEZE_RATE = 1.0
SQUEEZE_TIMES = (0.25, 0.5, 1.0)
SQUEEZE_DT = 1e-3
DEFECT_TOL = 1e-6
CONVERGENCE_STEPS = (0.02, 0.01, 0.005)
CONVERGENCE_TIME = 2.0
CONVERGENCE_ORDER = 4.0
CONVERGENCE_BAND = 0.3
STRUCTURE_TOL = 1e-10

# small resolvable instance for the assembled-generator checks
STRUCTURE_GRID = Grid(dim=1, points=32, length=6.0)
STRUCTURE_N = 4.0
STRUCTURE_BETA = 0.5
STRUCTURE_ELL = 1.0


def _unit_grid(modes: int) -> Grid:
    """Grid with unit weight, so kernel entries equal operator entries."""
    return Grid(dim=1, points=modes, length=float(modes))


def random_symmetric_kernel(rng: np.random.Generator, grid: Grid, hs_norm: float) -> HSKernel:
    """Complex symmetric kernel with the given HS norm."""
    M = grid.mode_count
    x = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    entries = 0.5 * (x + x.T)
    entries *= hs_norm / (grid.weight * np.linalg.norm(entries))
    return HSKernel(grid, entries, symmetric=True, kind="random")


def _row(check: str, trials: int, worst: float, threshold: float, passed: bool) -> Dict:
    return {
        "check": check,
        "trials": trials,
        "worst_value": float(worst),
        "threshold": float(threshold),
        "passed": bool(passed),
    }


def check_bogoliubov_identity(rng: np.random.Generator, settings: Dict) -> Dict:
    """‖cc* - ss* - 1‖ for random kernels with ‖k‖ up to max_kernel_norm."""
    grid = _unit_grid(settings["modes"])
    worst = 0.0
    for _ in range(settings["trials"]):
        norm = rng.uniform(0.0, settings["max_kernel_norm"])
        family = hyperbolic(random_symmetric_kernel(rng, grid, norm))
        worst = max(worst, verify_bogoliubov_identity(family.c, family.s))
    return _row("bogoliubov_identity", settings["trials"], worst, IDENTITY_TOL, worst <= IDENTITY_TOL)


def check_series_agreement(rng: np.random.Generator, settings: Dict) -> Dict:
    """Eigendecomposition against the power series for ‖k‖ <= series_kernel_norm."""
    grid = _unit_grid(settings["modes"])
    worst = 0.0
    for _ in range(settings["trials"]):
        k = random_symmetric_kernel(rng, grid, rng.uniform(0.0, settings["series_kernel_norm"]))
        exact, series = hyperbolic(k), hyperbolic_series(k)
        worst = max(worst, kernel_distance(exact.c, series.c), kernel_distance(exact.s, series.s))
    return _row(
        "series_agreement", settings["trials"], worst, SERIES_AGREEMENT_TOL, worst <= SERIES_AGREEMENT_TOL
    )


def check_ad_series_bound(rng: np.random.Generator, settings: Dict) -> Dict:
    """
    ‖f_{n,i}‖_HS / (2ⁿ ‖k‖ⁿ ‖k̇‖) for every computed n up to ad_series_order;
    the worst ratio must not exceed 1.
    """
    grid = _unit_grid(min(settings["modes"], 32))
    order = settings["ad_series_order"]
    worst = 0.0
    for _ in range(settings["ad_series_trials"]):
        k = random_symmetric_kernel(rng, grid, rng.uniform(0.1, 1.0))
        kdot = random_symmetric_kernel(rng, grid, rng.uniform(0.1, 1.0))
        k_norm, kdot_norm = k.hs_norm, kdot.hs_norm
        bounds = [(2.0 * k_norm) ** n * kdot_norm for n in range(order + 1)]
        # stop strictly after `order`
        tol = 0.5 * min(b / math.factorial(n + 1) for n, b in enumerate(bounds))
        series = ad_series(k, kdot, tol=tol, n_max=order + 200)
        for term in series.terms[: order + 1]:
            bound = bounds[term.n]
            excess = max(term.f1.hs_norm, term.f2.hs_norm) - AD_SERIES_SLACK
            worst = max(worst, excess / bound)
    return _row("ad_series_bound", settings["ad_series_trials"], worst, 1.0, worst <= 1.0)


def _squeeze_generator(rate: float) -> QuadGenerator:
    return QuadGenerator(
        A=np.zeros((1, 1), dtype=np.complex128),
        B=np.full((1, 1), rate, dtype=np.complex128),
        phase=0.0,
        weight=1.0,
    )


def check_squeezing_oracle(rng: np.random.Generator, settings: Dict) -> Dict:
    """RK4 frames against ⟨N⟩(t) = sinh²(bt) for a single squeezed mode."""
    schedule = GeneratorSchedule.constant(_squeeze_generator(SQUEEZE_RATE))
    frames, _ = evolve_frame(
        vacuum_frame(1), schedule, t_final=max(SQUEEZE_TIMES), dt=SQUEEZE_DT, sample_times=SQUEEZE_TIMES
    )
    worst = 0.0
    for frame in frames[1:]:
        expected = particle_number(single_mode_squeeze(SQUEEZE_RATE, frame.t))
        worst = max(worst, abs(particle_number(frame) - expected) / expected)
    return _row("squeezing_oracle", len(SQUEEZE_TIMES), worst, SQUEEZE_RTOL, worst <= SQUEEZE_RTOL)


def random_generator(rng: np.random.Generator, modes: int) -> QuadGenerator:
    """Hermitian A and symmetric B, each with unit spectral norm."""
    x = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    y = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    A = 0.5 * (x + x.conj().T)
    B = 0.5 * (y + y.T)
    A /= np.linalg.norm(A, 2)
    B /= np.linalg.norm(B, 2)
    return QuadGenerator(A=A, B=B, phase=0.0, weight=1.0)


def check_symplectic_defect(rng: np.random.Generator, settings: Dict) -> Dict:
    """Worst symplectic defect over t in [0, 1] for random generators."""
    modes = min(settings["modes"], 512)
    trials = max(1, settings["trials"] // 10)
    worst = 0.0
    for _ in range(trials):
        schedule = GeneratorSchedule.constant(random_generator(rng, modes))
        _, series = evolve_frame(
            vacuum_frame(modes),
            schedule,
            t_final=1.0,
            dt=SQUEEZE_DT,
            sample_times=np.linspace(0.0, 1.0, 11),
            tol=DEFECT_TOL,
        )
        worst = max(worst, max(series.symplectic_defect))
    return _row("symplectic_defect", trials, worst, DEFECT_TOL, worst <= DEFECT_TOL)


def check_self_convergence(rng: np.random.Generator, settings: Dict) -> Dict:
    """Observed order of the frame integrator against the squeezing closed form."""
    schedule = GeneratorSchedule.constant(_squeeze_generator(SQUEEZE_RATE))
    exact = single_mode_squeeze(SQUEEZE_RATE, CONVERGENCE_TIME)
    errors = []
    for dt in CONVERGENCE_STEPS:
        frames, _ = evolve_frame(vacuum_frame(1), schedule, t_final=CONVERGENCE_TIME, dt=dt)
        errors.append(compare_frames(frames[-1], exact))
    slope = fit_rate(CONVERGENCE_STEPS, errors).slope
    deviation = abs(slope - CONVERGENCE_ORDER)
    return _row(
        "self_convergence_order", len(CONVERGENCE_STEPS), slope, CONVERGENCE_ORDER,
        deviation <= CONVERGENCE_BAND,
    )


def check_generator_structure(schema: ExperimentSchema) -> Callable:
    """
    Assembles L_{2,N} and L_{2,∞} on a small grid and reports the worst
    Hermitian or symmetric defect; the phases are checked during assembly.
    """

    def check(rng: np.random.Generator, settings: Dict) -> Dict:
        phi = gaussian_condensate(STRUCTURE_GRID, 0.5)
        scat = solve_neumann(schema.potential, STRUCTURE_N, STRUCTURE_BETA, STRUCTURE_ELL)
        generators = [
            assemble_L2N(scat, phi),
            assemble_L2inf(schema.b0, STRUCTURE_ELL, phi),
        ]
        worst = 0.0
        for generator in generators:
            scale = max(1.0, float(np.linalg.norm(generator.A)), float(np.linalg.norm(generator.B)))
            defect = max(generator.hermitian_defect(), generator.symmetric_defect()) / scale
            worst = max(worst, defect, abs(float(np.imag(generator.phase))))
        return _row("generator_structure", len(generators), worst, STRUCTURE_TOL, worst <= STRUCTURE_TOL)

    return check


def _checks(schema: ExperimentSchema) -> List[Callable]:
    return [
        check_bogoliubov_identity,
        check_series_agreement,
        check_ad_series_bound,
        check_squeezing_oracle,
        check_symplectic_defect,
        check_self_convergence,
        check_generator_structure(schema),
    ]


def run_property_suite(schema: ExperimentSchema, seed: int, n_jobs: int = 1) -> pd.DataFrame:
    """
    Runs every property check with its own generator seeded from `seed` and
    the check's position, so results do not depend on scheduling.

    Returns:
        pd.DataFrame: One row per check (check, trials, worst_value,
            threshold, passed).
    """
    settings = schema.suite
    checks = _checks(schema)

    def run(indexed):
        index, check = indexed
        rng = np.random.default_rng([seed, index])
        row = check(rng, settings)
        status = "passed" if row["passed"] else "FAILED"
        logger.info(f"{row['check']}: worst {row['worst_value']:.3e} ({status})")
        return row

    rows = run_in_parallel(run, list(enumerate(checks)), n_jobs=n_jobs)
    return pd.DataFrame(rows, columns=["check", "trials", "worst_value", "threshold", "passed"])


def run_suite(schema: ExperimentSchema, output_dir: str, seed: int, n_jobs: int = 1) -> pd.DataFrame:
    """
    Runs the property suite and writes suite.csv, the schema and the summary.

    Raises:
        NumericError: After writing the outputs, if any check failed.
    """
    results = run_property_suite(schema, seed, n_jobs=n_jobs)
    failed = results.loc[~results["passed"], "check"].tolist()
    summary = {"seed": seed, "all_passed": not failed, "failed": failed}
    write_outputs(results, "suite", schema, output_dir, summary)
    if failed:
        raise NumericError(f"Property checks failed: {failed}")
    return results
