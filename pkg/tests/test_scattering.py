import math

import numpy as np
import pytest

from errors import ContractViolationError, InvalidPotentialError, SingularityError
from experiments.rate_fit import fit_rate
from physics.scattering import (
    PotentialSpec,
    check_lemma_bounds,
    coupling_defect,
    integrate_b0,
    omega_asymp,
    omega_asymp_ball_average,
    omega_difference_bound,
    parabolic,
    potential_from_config,
    save_radial_scattering,
    scattering_length,
    solve_neumann,
    square_well,
    zero_potential,
)


def test_b0_of_square_well_and_parabolic():
    assert square_well(2.0, 0.5).b0 == pytest.approx(4.0 * math.pi / 3.0 * 2.0 * 0.125, rel=1e-10)
    assert parabolic(1.0, 1.0).b0 == pytest.approx(8.0 * math.pi / 15.0, rel=1e-10)


def test_negative_potential_is_rejected():
    with pytest.raises(InvalidPotentialError):
        PotentialSpec("dip", lambda r: -np.ones_like(r), support_radius=1.0)


def test_unknown_shape_is_rejected():
    with pytest.raises(InvalidPotentialError):
        potential_from_config("gaussian", 1.0, 1.0)


def test_zero_strength_builds_zero_potential():
    assert potential_from_config("square_well", 0.0, 1.0).is_zero


def test_zero_potential_has_trivial_ground_state():
    sol = solve_neumann(zero_potential(1.0), N=16.0, beta=0.5, ell=1.0)
    assert sol.lam == 0.0
    assert np.allclose(sol.f_values, 1.0)
    assert sol.coupling_integral() == 0.0


def test_support_must_fit_inside_neumann_ball(well):
    with pytest.raises(ContractViolationError):
        solve_neumann(well, N=1.0, beta=0.5, ell=1.0)


def test_beta_outside_unit_interval_is_rejected(well):
    with pytest.raises(ContractViolationError):
        solve_neumann(well, N=16.0, beta=1.0, ell=1.0)


def test_eigenvalue_sits_below_variational_value(neumann_solution, well):
    lam_variational = 3.0 * well.b0 / (8.0 * math.pi * 4.0)
    assert 0.0 < neumann_solution.lam <= lam_variational


def test_ground_state_shape(neumann_solution):
    f = neumann_solution.f_values
    assert np.all(f > 0)
    assert np.all(f <= 1.0 + 1e-12)
    assert np.all(np.diff(f) >= -1e-10)
    assert neumann_solution.boundary_residual < 1e-8
    assert neumann_solution.omega(1.5) == 0.0


def test_eigenvalue_approaches_variational_value_with_n(well):
    ratios = []
    for N in (16.0, 256.0):
        sol = solve_neumann(well, N=N, beta=0.5, ell=1.0)
        ratios.append(sol.lam / (3.0 * well.b0 / (8.0 * math.pi * N)))
    assert ratios[0] < ratios[1] <= 1.0


def test_coupling_integral_converges_to_b0(well):
    defects = [coupling_defect(solve_neumann(well, N, 0.5, 1.0), well.b0) for N in (16.0, 256.0)]
    assert defects[1] < defects[0]
    assert defects[1] < 0.1 * well.b0


def test_bound_constants_are_finite_and_positive(neumann_solution, well):
    report = check_lemma_bounds(neumann_solution, well.b0)
    assert 0.0 < report.c0 <= 1.0
    assert report.variational_gap >= 0.0
    assert report.c_omega > 0.0
    assert report.c_grad > 0.0


def test_scattering_length_matches_square_well_closed_form(well):
    kappa = math.sqrt(0.5)
    expected = 1.0 - math.tanh(kappa) / kappa
    a0 = scattering_length(well, domain_radius=10.0)
    assert a0 == pytest.approx(expected, rel=1e-8)
    assert a0 < well.b0 / (8.0 * math.pi)


def test_scattering_length_needs_large_domain(well):
    with pytest.raises(ContractViolationError):
        scattering_length(well, domain_radius=5.0)


def test_omega_asymp_profile():
    assert omega_asymp(1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert omega_asymp(1.0, 1.0, 2.0) == 0.0
    with pytest.raises(SingularityError):
        omega_asymp(1.0, 1.0, np.array([0.0, 0.5]))


def test_omega_asymp_ball_average_matches_quadrature():
    h = 0.3
    r = np.linspace(1e-7, h, 200001)
    numeric = 3.0 / h**3 * np.trapz(r**2 * omega_asymp(2.0, 1.0, r), r)
    assert omega_asymp_ball_average(2.0, 1.0, h) == pytest.approx(numeric, rel=1e-6)


def test_radial_profile_is_written(tmp_path, neumann_solution, well):
    path = save_radial_scattering(neumann_solution, well.b0, str(tmp_path))
    assert path.endswith("radial.csv")
    assert (tmp_path / "radial.csv").exists()


def test_integrate_b0_matches_ball_volume():
    assert integrate_b0(square_well(1.0, 1.0)) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)
    assert integrate_b0(zero_potential(1.0)) == 0.0


def test_omega_difference_bound_is_finite(neumann_solution, well):
    bound = omega_difference_bound(neumann_solution, well.b0)
    assert np.isfinite(bound)
    assert bound >= 0.0


@pytest.mark.slow
def test_eigenvalue_rate_and_bound_constants_over_sweep(well):
    n_values = [64.0, 256.0, 1024.0, 4096.0]
    limit = 3.0 * well.b0 / (8.0 * math.pi)
    solutions = [solve_neumann(well, N, 0.5, 1.0) for N in n_values]
    fit = fit_rate(n_values, [abs(sol.N * sol.lam - limit) for sol in solutions])
    assert -0.7 <= fit.slope <= -0.3
    reports = [check_lemma_bounds(sol, well.b0) for sol in solutions]
    for constants in ([r.c_omega for r in reports], [r.c_grad for r in reports]):
        assert max(constants) / min(constants) < 2.0


def test_eigenvalue_does_not_depend_on_radial_resolution(well):
    coarse = solve_neumann(well, N=1024.0, beta=0.5, ell=1.0, n_grid=2000)
    fine = solve_neumann(well, N=1024.0, beta=0.5, ell=1.0, n_grid=4000)
    assert abs(fine.lam - coarse.lam) / coarse.lam < 1e-6


def test_scattering_length_does_not_depend_on_domain(well):
    near = scattering_length(well, domain_radius=10.0)
    far = scattering_length(well, domain_radius=20.0)
    assert abs(far - near) / near < 1e-4
