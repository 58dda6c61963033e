import math

import numpy as np
import pytest

from errors import ContractViolationError, GridMismatchError
from physics.fields import Grid, GridField, gaussian_condensate
from physics.kernels import (
    AsymptoticProfile,
    HSKernel,
    build_k_limit,
    build_k_N,
    derivative_kernels,
    differentiate_rows,
    gradient_symbols,
    hyperbolic,
    hyperbolic_series,
    identity_kernel,
    kernel_distance,
    kernel_norms,
    verify_bogoliubov_identity,
)
from physics.scattering import solve_neumann, zero_potential

UNIT_GRID = Grid(dim=1, points=16, length=16.0)


def _random_symmetric(seed, hs_norm, grid=UNIT_GRID):
    rng = np.random.default_rng(seed)
    M = grid.mode_count
    x = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    entries = 0.5 * (x + x.T)
    entries *= hs_norm / (grid.weight * np.linalg.norm(entries))
    return HSKernel(grid, entries, symmetric=True, kind="random")


def test_kernel_shape_is_checked():
    with pytest.raises(ContractViolationError):
        HSKernel(UNIT_GRID, np.zeros((4, 4)))


def test_symmetric_flag_requires_exact_symmetry():
    entries = np.zeros((16, 16))
    entries[0, 1] = 1.0
    with pytest.raises(ContractViolationError):
        HSKernel(UNIT_GRID, entries, symmetric=True)


def test_identity_kernel_operator_is_identity():
    grid = Grid(dim=1, points=8, length=2.0)
    assert np.allclose(identity_kernel(grid).operator, np.eye(8))


def test_hyperbolic_of_zero_kernel():
    family = hyperbolic(HSKernel(UNIT_GRID, np.zeros((16, 16)), symmetric=True))
    assert np.allclose(family.c.operator, np.eye(16))
    assert family.s.hs_norm == 0.0
    assert family.p.hs_norm == pytest.approx(0.0, abs=1e-12)


def test_hyperbolic_of_diagonal_kernel():
    a = np.linspace(-1.5, 2.0, 16)
    family = hyperbolic(HSKernel(UNIT_GRID, np.diag(a), symmetric=True))
    assert np.allclose(np.diag(family.c.entries), np.cosh(a), atol=1e-12)
    assert np.allclose(np.diag(family.s.entries), np.sinh(a), atol=1e-12)
    assert np.allclose(np.diag(family.r.entries), np.sinh(a) - a, atol=1e-12)


@pytest.mark.parametrize("hs_norm", [0.1, 1.0, 3.0])
def test_bogoliubov_identity_holds(hs_norm):
    family = hyperbolic(_random_symmetric(7, hs_norm))
    assert verify_bogoliubov_identity(family.c, family.s) < 1e-8
    assert np.array_equal(family.s.entries, family.s.entries.T)


def test_eigendecomposition_agrees_with_power_series():
    k = _random_symmetric(11, 0.8)
    exact, series = hyperbolic(k), hyperbolic_series(k)
    assert kernel_distance(exact.c, series.c) < 1e-10
    assert kernel_distance(exact.s, series.s) < 1e-10


def test_kernel_norms():
    entries = np.zeros((16, 16), dtype=complex)
    entries[2, 3] = entries[3, 2] = 3.0 - 4.0j
    norms = kernel_norms(HSKernel(UNIT_GRID, entries, symmetric=True))
    assert norms["sup_entry"] == pytest.approx(5.0)
    assert norms["sup_row"] == pytest.approx(5.0)
    assert norms["hs"] == pytest.approx(5.0 * math.sqrt(2.0))


def test_distance_between_grids_is_refused():
    other = Grid(dim=1, points=16, length=8.0)
    with pytest.raises(GridMismatchError):
        kernel_distance(
            HSKernel(UNIT_GRID, np.zeros((16, 16))), HSKernel(other, np.zeros((16, 16)))
        )


def test_row_differentiation_of_plane_wave_rows():
    grid = Grid(dim=1, points=32, length=2.0 * math.pi)
    wave = np.exp(3j * grid.coordinates)
    entries = np.repeat(wave[:, None], grid.mode_count, axis=1)
    derived = differentiate_rows(entries, grid, gradient_symbols(grid)[0])
    assert np.allclose(derived, 3j * entries, atol=1e-10)


def test_pair_kernels_are_symmetric(condensate, neumann_solution):
    k_N = build_k_N(neumann_solution, condensate, 4.0)
    k_limit = build_k_limit(4.0 * math.pi / 3.0, 1.0, condensate)
    for k in (k_N, k_limit):
        assert k.symmetric
        assert np.isfinite(k.hs_norm) and k.hs_norm > 0.0
    assert kernel_distance(k_N, k_limit) > 0.0


def test_k_N_requires_matching_particle_number(condensate, neumann_solution):
    with pytest.raises(ContractViolationError):
        build_k_N(neumann_solution, condensate, 8.0)


def test_zero_potential_gives_zero_kernel(condensate):
    scat = solve_neumann(zero_potential(1.0), N=4.0, beta=0.5, ell=1.0)
    assert build_k_N(scat, condensate, 4.0).hs_norm == pytest.approx(0.0, abs=1e-12)
    assert build_k_limit(0.0, 1.0, condensate).hs_norm == 0.0


def test_derivative_kernels_of_constant_condensate():
    grid = Grid(dim=1, points=16, length=4.0)
    phi = GridField(grid, np.full(16, 0.5))
    profile = AsymptoticProfile(1.0, 1.0)
    family = hyperbolic(build_k_limit(1.0, 1.0, phi))
    derivs = derivative_kernels(profile, phi, family)
    assert len(derivs.grad1_k) == len(derivs.grad1_p) == len(derivs.grad1_s) == 1
    # translation invariant kernels differentiate to odd functions of x - y
    grad = derivs.grad1_k[0].entries
    assert np.allclose(grad, -grad.T, atol=1e-10)


def test_vanishing_condensate_gives_zero_kernels_and_distances(small_grid, neumann_solution, well):
    phi = GridField(small_grid, np.zeros(small_grid.shape))
    k_N = build_k_N(neumann_solution, phi, 4.0)
    k_limit = build_k_limit(well.b0, 1.0, phi)
    assert k_N.hs_norm == 0.0
    assert k_limit.hs_norm == 0.0
    assert kernel_distance(k_N, k_limit) == 0.0
    family_N, family = hyperbolic(k_N), hyperbolic(k_limit)
    assert kernel_distance(family_N.p, family.p) == pytest.approx(0.0, abs=1e-14)
    assert kernel_distance(family_N.s, family.s) == pytest.approx(0.0, abs=1e-14)


def test_hyperbolic_outputs_of_scattering_kernel(condensate, neumann_solution):
    family = hyperbolic(build_k_N(neumann_solution, condensate, 4.0))
    for kernel in (family.c, family.p):
        op = kernel.operator
        assert np.allclose(op, op.conj().T, atol=1e-12)
    assert np.allclose(family.s.operator, family.s.operator.T, atol=1e-12)
    assert verify_bogoliubov_identity(family.c, family.s) <= 1e-8


def test_one_dimensional_limit_kernel_is_not_hilbert_schmidt(well):
    # 1/|x - y| is not square integrable near the diagonal of a line
    norms = []
    for points in (256, 1024):
        grid = Grid(dim=1, points=points, length=8.0)
        norms.append(build_k_limit(well.b0, 1.0, gaussian_condensate(grid, 0.5)).hs_norm)
    assert norms[1] / norms[0] > 1.4
