import math
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import paths
from data_models.results_data_model import validate_results
from errors import FitRefusedError, IntegrationDivergedError
from experiments.rate_fit import KERNEL_SLOPE_CEILING, RATE_TOLERANCES, expected_rates, fit_rate, rate_band
from logger import get_logger, log_diagnostic
from physics.dynamics import (
    GeneratorSchedule,
    compare_frames,
    evolve_frame,
    growth_report,
    kinetic_energy,
    particle_number,
    second_moment,
    symplectic_defect,
    vacuum_frame,
)
from physics.fields import (
    Grid,
    GridField,
    HartreeCoupling,
    LocalCoupling,
    check_resolvable,
    evolve_trajectory,
    gaussian_condensate,
    l2_distance,
    mass,
    save_field,
    sobolev_distance,
    time_derivative,
)
from physics.generator import assemble_L2inf, assemble_L2N, kinetic_matrix
from physics.kernels import (
    ScatteringProfile,
    build_k_limit,
    build_k_N,
    derivative_kernels,
    hyperbolic,
    kernel_distance,
    kernel_norms,
    log_remainder_diagnostic,
    save_kernel,
    vector_hs_norm,
)
from physics.scattering import (
    RadialScattering,
    check_lemma_bounds,
    coupling_defect,
    omega_difference_bound,
    save_radial_scattering,
    scattering_length,
    solve_neumann,
)
from schema.experiment_schema import ExperimentSchema, save_schema
from utils import read_json_as_dict, run_in_parallel, save_dataframe_as_csv, save_json

logger = get_logger(task_name="studies")

# absolute slack on the series domination check
DOMINATION_SLACK = 1e-12
# largest growth of ‖k_0‖ under grid doubling still read as converged
REFINEMENT_GROWTH_TOL = 0.1


def _run_config() -> Dict:
    return read_json_as_dict(paths.RUN_CONFIG_FILE_PATH)


def _fit_or_none(n_values: Sequence[float], errors: Sequence[float], label: str) -> Optional[Dict]:
    try:
        return fit_rate(n_values, errors).as_dict()
    except FitRefusedError as exc:
        logger.warning(f"No rate fit for {label}: {exc}")
        return None


def _band(fit: Optional[Dict], rate: str, beta: float, label: str, ceiling: Optional[float] = None) -> Dict:
    band = rate_band(
        None if fit is None else fit["slope"], -expected_rates(beta)[rate], RATE_TOLERANCES[rate], ceiling
    )
    if band["met"]:
        logger.info(f"{label}: slope {band['slope']:.3f} within {band['expected']:.3f} ± {band['tolerance']:g}")
    else:
        logger.warning(
            f"{label}: slope {band['slope']} misses the band {band['expected']:.3f} ± {band['tolerance']:g}"
        )
    return band


def _non_increasing(values: Sequence[float]) -> bool:
    values = list(values)
    return all(b <= a * (1.0 + 1e-12) + 1e-15 for a, b in zip(values[:-1], values[1:]))


def write_outputs(
    results: pd.DataFrame,
    table_name: str,
    schema: ExperimentSchema,
    output_dir: str,
    summary: Dict,
) -> str:
    """
    Validates and writes the result table, the schema and the run summary.

    Returns:
        str: Path of the CSV file.
    """
    results = validate_results(results, table_name)
    csv_path = os.path.join(output_dir, f"{table_name}.csv")
    save_dataframe_as_csv(
        results,
        csv_path,
        float_format=_run_config()["float_format"],
        footer=f"config_hash={schema.config_hash}",
    )
    save_schema(schema, output_dir)
    summary = dict(summary)
    summary.update({"study": schema.kind, "config_hash": schema.config_hash, "rows": len(results)})
    save_json(os.path.join(output_dir, "summary.json"), summary)
    logger.info(f"Results written to {csv_path}")
    return csv_path


def _solve_all(schema: ExperimentSchema, n_jobs: int) -> List[RadialScattering]:
    potential, beta, ell = schema.potential, schema.beta, schema.ell
    radial_points = schema.tolerances["radial_points"]

    def solve(N: float) -> RadialScattering:
        logger.info(f"Solving the Neumann problem for N={N:g}...")
        return solve_neumann(potential, N, beta, ell, n_grid=radial_points)

    return run_in_parallel(solve, schema.n_list, n_jobs=n_jobs)


def _initial_condensate(schema: ExperimentSchema) -> GridField:
    return gaussian_condensate(schema.grid, schema.width, kick=schema.kick)


def run_scattering_study(schema: ExperimentSchema, output_dir: str, n_jobs: int = 1) -> pd.DataFrame:
    """
    Eigenvalue asymptotics and pointwise bound constants across the N sweep.

    Writes scattering.csv (one row per N), the radial profile of the largest
    N, the saved schema and summary.json with the rate fits and the
    scattering length.

    Args:
        schema (ExperimentSchema): Validated configuration of kind scattering.
        output_dir (str): Directory for the outputs.
        n_jobs (int): Worker count for the per-N solves.

    Returns:
        pd.DataFrame: The result table.
    """
    b0, ell = schema.b0, schema.ell
    limit = 3.0 * b0 / (8.0 * math.pi * ell**3)
    solutions = _solve_all(schema, n_jobs)

    rows = []
    for sol in solutions:
        report = check_lemma_bounds(sol, b0)
        rows.append(
            {
                "N": sol.N,
                "lambda": sol.lam,
                "N_lambda": sol.N * sol.lam,
                "lambda_deviation": abs(sol.N * sol.lam - limit),
                **report.as_dict(),
                "omega_difference_bound": omega_difference_bound(sol, b0),
                "coupling_integral": sol.coupling_integral(),
                "coupling_defect": coupling_defect(sol, b0),
                "boundary_residual": sol.boundary_residual,
            }
        )
    results = pd.DataFrame(rows)

    logger.info("Computing the scattering length...")
    potential = schema.potential
    a0 = scattering_length(potential, 10.0 * potential.support_radius, schema.tolerances["radial_points"])
    a0_bound = b0 / (8.0 * math.pi)

    for column in ("c_omega", "c_grad"):
        values = results[column].to_numpy()
        if values.min() > 0:
            log_diagnostic(logger, f"{column} spread (max/min) over the sweep", values.max() / values.min(), 2.0)

    n_values = results["N"].tolist()
    lambda_fit = _fit_or_none(n_values, results["lambda_deviation"], "lambda deviation")
    lambda_band = _band(lambda_fit, "eigenvalue", schema.beta, "lambda deviation")
    summary = {
        "b0": b0,
        "a0": a0,
        "a0_bound": a0_bound,
        "a0_below_bound": bool(a0 <= a0_bound * (1.0 + 1e-12)),
        "eigenvalue_limit": limit,
        "expected_slope": -expected_rates(schema.beta)["eigenvalue"],
        "lambda_fit": lambda_fit,
        "rate_band": lambda_band,
        "rate_band_met": lambda_band["met"],
        "coupling_fit": _fit_or_none(n_values, results["coupling_defect"], "coupling defect"),
    }
    save_radial_scattering(solutions[-1], b0, output_dir, stem=f"radial_N{solutions[-1].N:g}")
    write_outputs(results, "scattering", schema, output_dir, summary)
    return results


def _trajectories(schema: ExperimentSchema, times: Sequence[float], n_jobs: int):
    """NLS snapshots, and per N the solution, coupling and Hartree snapshots."""
    grid = schema.grid
    phi0 = _initial_condensate(schema)
    solutions = _solve_all(schema, n_jobs)
    for sol in solutions:
        check_resolvable(grid, sol)

    logger.info("Evolving the NLS flow...")
    local = LocalCoupling(schema.b0)
    limit_snapshots, limit_table = evolve_trajectory(phi0, local, times, schema.dt)

    def hartree(sol: RadialScattering):
        logger.info(f"Evolving the Hartree flow for N={sol.N:g}...")
        coupling = HartreeCoupling(grid, sol)
        snapshots, _ = evolve_trajectory(phi0, coupling, times, schema.dt)
        return sol, coupling, snapshots

    per_n = run_in_parallel(hartree, solutions, n_jobs=n_jobs)
    return (local, limit_snapshots, limit_table), per_n


def run_nls_convergence(schema: ExperimentSchema, output_dir: str, n_jobs: int = 1) -> pd.DataFrame:
    """
    Distance between the Hartree flow with W_N and the NLS flow with b0,
    per (N, t), in L², H² and for the time derivatives.

    Returns:
        pd.DataFrame: The result table.
    """
    times = schema.times
    (local, limit_snapshots, limit_table), per_n = _trajectories(schema, times, n_jobs)

    rows = []
    for sol, coupling, snapshots in per_n:
        for phi_n, phi in zip(snapshots, limit_snapshots):
            rows.append(
                {
                    "N": sol.N,
                    "t": phi.t,
                    "l2_distance": l2_distance(phi_n, phi),
                    "h2_distance": sobolev_distance(phi_n, phi, 2),
                    "dot_distance": l2_distance(
                        time_derivative(phi_n, coupling), time_derivative(phi, local)
                    ),
                    "mass_N": mass(phi_n),
                    "mass_limit": mass(phi),
                }
            )
    results = pd.DataFrame(rows)

    fits, bands, monotone = {}, {}, {}
    for t in times:
        at_t = results[np.isclose(results["t"], t)]
        monotone[f"{t:g}"] = _non_increasing(at_t["l2_distance"])
        if t > 0:
            label = f"NLS distance at t={t:g}"
            fits[f"{t:g}"] = _fit_or_none(at_t["N"], at_t["l2_distance"], label)
            bands[f"{t:g}"] = _band(fits[f"{t:g}"], "nls", schema.beta, label)
    summary = {
        "expected_slope": -expected_rates(schema.beta)["nls"],
        "fits": fits,
        "monotone_in_N": monotone,
        "rate_band": bands,
        "rate_band_met": bool(bands) and all(band["met"] for band in bands.values()),
    }
    save_dataframe_as_csv(
        limit_table,
        os.path.join(output_dir, "nls_limit_trajectory.csv"),
        float_format=_run_config()["float_format"],
        footer=f"config_hash={schema.config_hash}",
    )
    last_sol, _, last_snapshots = per_n[-1]
    save_field(limit_snapshots[-1], os.path.join(output_dir, "nls_limit_final.bin"), "nls", {"b0": schema.b0})
    save_field(
        last_snapshots[-1],
        os.path.join(output_dir, f"hartree_N{last_sol.N:g}_final.bin"),
        "hartree",
        {"N": last_sol.N, "beta": schema.beta, "ell": schema.ell},
    )
    write_outputs(results, "nls", schema, output_dir, summary)
    return results


def _limit_kernel_refinement(schema: ExperimentSchema) -> float:
    """
    ‖k_0‖_HS on the study grid over ‖k_0‖_HS on the grid with half the points
    per axis. The ratio tends to 1 when k_t is Hilbert-Schmidt (dim 3) and
    keeps growing like √2 per doubling in dim 1, where the 1/|x - y| singularity of
    the pair profile is not square integrable.
    """
    grid = schema.grid
    coarse = Grid(grid.dim, grid.points // 2, grid.length)
    norms = [
        build_k_limit(schema.b0, schema.ell, gaussian_condensate(g, schema.width, kick=schema.kick)).hs_norm
        for g in (grid, coarse)
    ]
    ratio = norms[0] / norms[1] if norms[1] > 0 else 1.0
    log_diagnostic(logger, "‖k_0‖ growth under grid refinement", ratio, 1.0 + REFINEMENT_GROWTH_TOL)
    return float(ratio)


def run_kernel_convergence(schema: ExperimentSchema, output_dir: str, n_jobs: int = 1) -> pd.DataFrame:
    """
    HS distances ‖k_{N,t} - k_t‖ and ‖p_{N,t} - p_t‖ per (N, t), the norms
    entering the fluctuation bounds, and the series domination
    ‖p_N - p‖ <= exp(‖k_N‖ + ‖k‖) ‖k_N - k‖.

    Returns:
        pd.DataFrame: The result table.
    """
    times = schema.times
    b0, ell = schema.b0, schema.ell
    (_, limit_snapshots, _), per_n = _trajectories(schema, times, n_jobs)
    largest_N = per_n[-1][0].N

    def kernel_rows(item) -> List[Dict]:
        sol, _, snapshots = item
        profile = ScatteringProfile(sol)
        rows = []
        for phi_n, phi in zip(snapshots, limit_snapshots):
            k_n = build_k_N(sol, phi_n, sol.N)
            k = build_k_limit(b0, ell, phi)
            if sol.N == largest_N and phi is limit_snapshots[-1]:
                save_kernel(k_n, os.path.join(output_dir, f"k_N{sol.N:g}.bin"), {"t": phi.t})
                save_kernel(k, os.path.join(output_dir, "k_limit.bin"), {"t": phi.t})
            family_n, family = hyperbolic(k_n), hyperbolic(k)
            log_remainder_diagnostic(family_n)
            derivs = derivative_kernels(profile, phi_n, family_n)
            k_distance = kernel_distance(k_n, k)
            p_distance = kernel_distance(family_n.p, family.p)
            p_bound = math.exp(k_n.hs_norm + k.hs_norm) * k_distance
            rows.append(
                {
                    "N": sol.N,
                    "t": phi.t,
                    "k_distance": k_distance,
                    "p_distance": p_distance,
                    "p_bound": p_bound,
                    "p_dominated": bool(p_distance <= p_bound + DOMINATION_SLACK),
                    "k_norm": k_n.hs_norm,
                    "k_limit_norm": k.hs_norm,
                    "k_sup_row": kernel_norms(k_n)["sup_row"],
                    "grad1_k_norm": vector_hs_norm(derivs.grad1_k),
                    "grad1_p_norm": vector_hs_norm(derivs.grad1_p),
                }
            )
        return rows

    nested = run_in_parallel(kernel_rows, per_n, n_jobs=n_jobs)
    results = pd.DataFrame([row for rows in nested for row in rows])

    fits, p_fits, bands = {}, {}, {}
    for t in times:
        at_t = results[np.isclose(results["t"], t)]
        key = f"{t:g}"
        fits[key] = _fit_or_none(at_t["N"], at_t["k_distance"], f"kernel distance at t={key}")
        p_fits[key] = _fit_or_none(at_t["N"], at_t["p_distance"], f"p distance at t={key}")
        bands[key] = {
            "k": _band(fits[key], "kernel", schema.beta, f"kernel distance at t={key}", KERNEL_SLOPE_CEILING),
            "p": _band(p_fits[key], "kernel", schema.beta, f"p distance at t={key}", KERNEL_SLOPE_CEILING),
        }
    refinement = _limit_kernel_refinement(schema)
    summary = {
        "expected_slope": -expected_rates(schema.beta)["kernel"],
        "fits": fits,
        "p_fits": p_fits,
        "p_dominated": bool(results["p_dominated"].all()),
        "rate_band": bands,
        "rate_band_met": bool(bands) and all(band["k"]["met"] for band in bands.values()),
        "limit_kernel_refinement_ratio": refinement,
        "limit_kernel_grid_converged": bool(refinement <= 1.0 + REFINEMENT_GROWTH_TOL),
    }
    write_outputs(results, "kernels", schema, output_dir, summary)
    return results


def _frame_flow(schedule_times, generators, schema: ExperimentSchema, kinetic: np.ndarray, label: str):
    grid = schema.grid
    tolerances = schema.tolerances
    schedule = GeneratorSchedule(schedule_times, generators)
    samples = sorted(set(float(t) for t in schedule_times) | set(schema.times))
    try:
        frames, series = evolve_frame(
            vacuum_frame(grid.mode_count, grid.weight),
            schedule,
            t_final=float(schedule_times[-1]),
            dt=tolerances["frame_dt"],
            sample_times=samples,
            tol=tolerances["defect_tol"],
            kinetic=kinetic,
        )
    except IntegrationDivergedError as exc:
        raise IntegrationDivergedError(f"Frame flow for {label} diverged.", time=exc.time) from exc
    return frames, series, schedule


def _frame_at(frames, t: float):
    for frame in frames:
        if math.isclose(frame.t, t, rel_tol=1e-12, abs_tol=1e-12):
            return frame
    raise KeyError(f"No frame sampled at t={t}")


def run_fluctuation_comparison(
    schema: ExperimentSchema, output_dir: str, n_jobs: int = 1
) -> pd.DataFrame:
    """
    Bogoliubov frames of the L_{2,N} and L_{2,∞} flows from the vacuum,
    compared per (N, t), with observables, η_N and growth reports.

    Generators are assembled on the knot grid of the run configuration and
    interpolated linearly in between.

    Returns:
        pd.DataFrame: The result table.
    """
    grid = schema.grid
    b0, ell = schema.b0, schema.ell
    tolerances = schema.tolerances
    series_args = {"tol": tolerances["series_tol"], "n_max": tolerances["series_max_terms"]}
    t_final = max(schema.times)
    knots = GeneratorSchedule.knot_times(0.0, t_final, _run_config()["generator_steps_per_unit_time"])
    (_, limit_snapshots, _), per_n = _trajectories(schema, knots, n_jobs)
    kinetic = kinetic_matrix(grid)

    logger.info("Assembling the limiting generators...")
    limit_generators = [assemble_L2inf(b0, ell, phi, **series_args) for phi in limit_snapshots]
    limit_frames, limit_series, _ = _frame_flow(knots, limit_generators, schema, kinetic, "the limit")
    growth = {"limit": growth_report(limit_series).as_dict()}

    def flow(item):
        sol, _, snapshots = item
        logger.info(f"Assembling generators for N={sol.N:g}...")
        generators = [assemble_L2N(sol, phi, **series_args) for phi in snapshots]
        frames, series, _ = _frame_flow(knots, generators, schema, kinetic, f"N={sol.N:g}")
        etas = [g.eta for g in generators]
        return sol.N, frames, series, etas

    rows = []
    for N, frames, series, etas in run_in_parallel(flow, per_n, n_jobs=n_jobs):
        growth[f"N{N:g}"] = growth_report(series).as_dict()
        for t in schema.times:
            frame_n, frame = _frame_at(frames, t), _frame_at(limit_frames, t)
            rows.append(
                {
                    "N": N,
                    "t": t,
                    "frame_distance": compare_frames(frame_n, frame),
                    "particle_number_N": particle_number(frame_n),
                    "particle_number_limit": particle_number(frame),
                    "second_moment_N": second_moment(frame_n),
                    "second_moment_limit": second_moment(frame),
                    "kinetic_N": kinetic_energy(frame_n, kinetic),
                    "kinetic_limit": kinetic_energy(frame, kinetic),
                    "defect_N": symplectic_defect(frame_n),
                    "defect_limit": symplectic_defect(frame),
                    "eta_N": float(np.interp(t, knots, etas)),
                }
            )
    results = pd.DataFrame(rows)

    decreasing, monotone = {}, {}
    for t in schema.times:
        distances = results[np.isclose(results["t"], t)]["frame_distance"].to_numpy()
        monotone[f"{t:g}"] = _non_increasing(distances)
        if t > 0:
            decreasing[f"{t:g}"] = bool(distances[-1] < distances[0])
    summary = {
        "expected_slope": -expected_rates(schema.beta)["fluctuation"],
        "largest_N_closer": decreasing,
        "monotone_in_N": monotone,
    }
    for name, report in growth.items():
        save_json(os.path.join(output_dir, f"growth_{name}.json"), report)
    write_outputs(results, "fluct", schema, output_dir, summary)
    return results
