import math

import numpy as np
import pytest

from errors import ContractViolationError, GridMismatchError, ResolutionError
from experiments.rate_fit import fit_rate
from physics.fields import (
    Grid,
    GridField,
    HartreeCoupling,
    LocalCoupling,
    check_resolvable,
    evolve,
    evolve_hartree_N,
    evolve_nls,
    evolve_trajectory,
    gaussian_condensate,
    l2_distance,
    mass,
    max_admissible_n,
    pair_geometry,
    plane_wave,
    time_derivative,
    sobolev_norm,
    upsample_to_half_grid,
)
from physics.scattering import solve_neumann, zero_potential


@pytest.mark.parametrize("points", [0, 1, 12, 100])
def test_grid_requires_power_of_two(points):
    with pytest.raises(ContractViolationError):
        Grid(dim=1, points=points, length=1.0)


def test_grid_rejects_dimension_two():
    with pytest.raises(ContractViolationError):
        Grid(dim=2, points=8, length=1.0)


def test_field_shape_must_match_grid(small_grid):
    with pytest.raises(ContractViolationError):
        GridField(small_grid, np.zeros(16))


def test_gaussian_is_normalized(condensate):
    assert mass(condensate) == pytest.approx(1.0, abs=1e-12)
    assert sobolev_norm(condensate, 0) == pytest.approx(1.0, abs=1e-12)


def test_sobolev_norms_increase_with_order(condensate):
    norms = [sobolev_norm(condensate, n) for n in range(5)]
    assert all(a <= b for a, b in zip(norms, norms[1:]))
    with pytest.raises(ContractViolationError):
        sobolev_norm(condensate, 5)


def test_plane_wave_sobolev_norm(small_grid):
    phi = plane_wave(small_grid, (3,))
    k2 = (2.0 * math.pi * 3 / small_grid.length) ** 2
    assert sobolev_norm(phi, 2) == pytest.approx(1.0 + k2, rel=1e-12)


def test_distance_between_grids_is_refused(condensate):
    other = gaussian_condensate(Grid(dim=1, points=64, length=6.0), width=0.5)
    with pytest.raises(GridMismatchError):
        l2_distance(condensate, other)


def test_max_admissible_n():
    assert max_admissible_n(1.0, 0.1875, 0.5) == pytest.approx((1.0 / 0.375) ** 2)


def test_unresolvable_interaction_range_reports_admissible_n(small_grid, well):
    scat = solve_neumann(well, N=16.0, beta=0.5, ell=1.0)
    with pytest.raises(ResolutionError) as excinfo:
        check_resolvable(small_grid, scat)
    assert excinfo.value.max_admissible_n == pytest.approx(max_admissible_n(1.0, small_grid.dx, 0.5))


def test_nls_plane_wave_is_a_pure_phase(small_grid):
    phi0 = plane_wave(small_grid, (3,))
    b0, t = 2.0, 0.5
    k2 = (2.0 * math.pi * 3 / small_grid.length) ** 2
    phi_t = evolve_nls(phi0, b0, t, dt=1e-3)
    expected = phi0.values * np.exp(-1j * (k2 + b0 / small_grid.length) * t)
    assert np.allclose(phi_t.values, expected, atol=1e-10)
    assert phi_t.t == pytest.approx(t)


def test_evolution_requires_normalized_data(small_grid):
    phi0 = GridField(small_grid, 2.0 * plane_wave(small_grid, (1,)).values)
    with pytest.raises(ContractViolationError):
        evolve(phi0, LocalCoupling(1.0), 0.1, 1e-3)


def test_evolution_conserves_mass(condensate):
    phi_t = evolve_nls(condensate, 1.0, 0.25, dt=1e-3)
    assert mass(phi_t) == pytest.approx(1.0, abs=1e-10)


def test_hartree_kernel_integrates_to_coupling_integral(small_grid, neumann_solution):
    coupling = HartreeCoupling(small_grid, neumann_solution)
    total = small_grid.weight * np.sum(coupling.kernel)
    assert total == pytest.approx(neumann_solution.coupling_integral(), rel=1e-12)


def test_hartree_with_zero_potential_is_free_flow(condensate):
    scat = solve_neumann(zero_potential(1.0), N=4.0, beta=0.5, ell=1.0)
    hartree = evolve_hartree_N(condensate, scat, 4.0, 0.5, 0.2, dt=1e-3)
    free = evolve_nls(condensate, 0.0, 0.2, dt=1e-3)
    assert l2_distance(hartree, free) < 1e-12


def test_hartree_rejects_mismatched_solution(condensate, neumann_solution):
    with pytest.raises(ContractViolationError):
        evolve_hartree_N(condensate, neumann_solution, 8.0, 0.5, 0.1, 1e-3)


def test_trajectory_snapshots_and_table(condensate):
    snapshots, table = evolve_trajectory(condensate, LocalCoupling(1.0), [0.0, 0.1, 0.2], dt=1e-3)
    assert [s.t for s in snapshots] == [0.0, 0.1, 0.2]
    assert list(table.columns) == ["t", "mass", "energy", "h1", "h2"]
    assert np.allclose(table["mass"], 1.0, atol=1e-10)
    with pytest.raises(ContractViolationError):
        evolve_trajectory(condensate, LocalCoupling(1.0), [0.2, 0.1], dt=1e-3)


def test_upsampling_keeps_original_samples(condensate, small_grid):
    fine = upsample_to_half_grid(condensate.values, small_grid)
    assert fine.shape == (64,)
    assert np.allclose(fine[::2], condensate.values, atol=1e-12)


def test_pair_geometry_uses_minimal_image(small_grid):
    geometry = pair_geometry(small_grid)
    assert np.allclose(geometry.distances, geometry.distances.T)
    assert np.all(np.diag(geometry.distances) == 0.0)
    assert geometry.distances.max() <= 0.5 * small_grid.length + 1e-12
    assert geometry.distances[0, small_grid.points - 1] == pytest.approx(small_grid.dx)


def test_time_derivative_of_plane_wave(small_grid):
    wave = plane_wave(small_grid, (2,))
    b0 = 1.5
    k2 = (2.0 * math.pi * 2 / small_grid.length) ** 2
    density = b0 / small_grid.length
    derivative = time_derivative(wave, LocalCoupling(b0))
    assert np.allclose(derivative.values, -1j * (k2 + density) * wave.values, atol=1e-10)


def test_three_dimensional_nls_conserves_mass_and_energy(well):
    grid = Grid(dim=3, points=16, length=8.0)
    phi0 = gaussian_condensate(grid, width=1.0)
    _, table = evolve_trajectory(phi0, LocalCoupling(well.b0), [0.0, 1.0], dt=1e-3)
    energy0, energy1 = table["energy"].tolist()
    assert abs(energy1 - energy0) / max(1.0, abs(energy0)) <= 1e-6
    assert abs(table["mass"].iloc[1] - table["mass"].iloc[0]) <= 1e-9


def test_split_step_is_second_order():
    grid = Grid(dim=1, points=32, length=8.0)
    phi0 = gaussian_condensate(grid, width=1.0)
    dts = [0.02, 0.01, 0.005, 0.0025]
    finals = [evolve_nls(phi0, 2.0, 0.5, dt=dt) for dt in dts]
    differences = [l2_distance(a, b) for a, b in zip(finals[:-1], finals[1:])]
    assert fit_rate(dts[:-1], differences).slope == pytest.approx(2.0, abs=0.2)
