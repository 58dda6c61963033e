import math

import numpy as np
import pytest

from errors import ContractViolationError, GridMismatchError, IntegrationDivergedError
from physics.dynamics import (
    BogoliubovFrame,
    GeneratorSchedule,
    ObservableSeries,
    compare_frames,
    evolve_frame,
    growth_report,
    kinetic_energy,
    particle_number,
    second_moment,
    single_mode_squeeze,
    symplectic_defect,
    vacuum_frame,
)
from physics.generator import QuadGenerator


def _squeeze(rate=1.0):
    return QuadGenerator(
        A=np.zeros((1, 1), dtype=complex), B=np.full((1, 1), rate, dtype=complex), phase=0.0, weight=1.0
    )


def _random_generator(seed, modes=6):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    y = rng.standard_normal((modes, modes)) + 1j * rng.standard_normal((modes, modes))
    A, B = 0.5 * (x + x.conj().T), 0.5 * (y + y.T)
    return QuadGenerator(A / np.linalg.norm(A, 2), B / np.linalg.norm(B, 2), 0.0, 1.0)


def test_vacuum_observables():
    frame = vacuum_frame(4)
    assert particle_number(frame) == 0.0
    assert second_moment(frame) == 0.0
    assert symplectic_defect(frame) == 0.0


def test_squeezed_mode_observables():
    frame = single_mode_squeeze(1.0, 0.5)
    n = math.sinh(0.5) ** 2
    assert particle_number(frame) == pytest.approx(n)
    # ⟨N²⟩ = 3n² + 2n for a squeezed vacuum
    assert second_moment(frame) == pytest.approx(3.0 * n**2 + 2.0 * n)
    assert symplectic_defect(frame) < 1e-14


def test_particle_number_ignores_the_grid_weight():
    squeezed = single_mode_squeeze(1.0, 0.5)
    fine = BogoliubovFrame(squeezed.U, squeezed.V, weight=0.01)
    assert particle_number(fine) == pytest.approx(particle_number(squeezed))
    assert particle_number(fine) == pytest.approx(float(np.real(np.trace(fine.V @ fine.V.conj().T))))


def test_kinetic_energy_is_weighted_occupation():
    frame = single_mode_squeeze(1.0, 0.5)
    assert kinetic_energy(frame, np.array([[2.0]])) == pytest.approx(2.0 * particle_number(frame))


def test_frames_of_different_sizes_do_not_compare():
    with pytest.raises(GridMismatchError):
        compare_frames(vacuum_frame(2), vacuum_frame(3))
    with pytest.raises(ContractViolationError):
        compare_frames(vacuum_frame(2), vacuum_frame(2, t=1.0))


def test_rk4_reproduces_single_mode_squeezing():
    times = [0.25, 0.5, 1.0]
    frames, series = evolve_frame(
        vacuum_frame(1), GeneratorSchedule.constant(_squeeze()), t_final=1.0, dt=1e-3, sample_times=times
    )
    assert [frame.t for frame in frames] == [0.0] + times
    for frame in frames[1:]:
        expected = math.sinh(frame.t) ** 2
        assert particle_number(frame) == pytest.approx(expected, rel=1e-4)
    assert series.to_dataframe().shape == (4, 5)


def test_rk4_is_fourth_order():
    schedule = GeneratorSchedule.constant(_squeeze())
    exact = single_mode_squeeze(1.0, 2.0)
    errors = []
    for dt in (0.02, 0.01):
        frames, _ = evolve_frame(vacuum_frame(1), schedule, t_final=2.0, dt=dt)
        errors.append(compare_frames(frames[-1], exact))
    assert math.log2(errors[0] / errors[1]) == pytest.approx(4.0, abs=0.3)


def test_random_generator_keeps_symplectic_structure():
    _, series = evolve_frame(
        vacuum_frame(6), GeneratorSchedule.constant(_random_generator(0)), t_final=1.0, dt=1e-3,
        sample_times=np.linspace(0.0, 1.0, 5),
    )
    assert max(series.symplectic_defect) < 1e-6


def test_reversed_schedule_returns_to_vacuum():
    schedule = GeneratorSchedule.constant(_random_generator(1))
    frames, _ = evolve_frame(vacuum_frame(6), schedule, t_final=0.5, dt=1e-3)
    forward = frames[-1]
    start = BogoliubovFrame(forward.U, forward.V, t=0.0)
    back, _ = evolve_frame(start, schedule.reversed(0.5), t_final=0.5, dt=1e-3)
    assert compare_frames(back[-1], vacuum_frame(6, t=0.5)) < 1e-8


def test_schedule_interpolates_between_knots():
    schedule = GeneratorSchedule([0.0, 1.0], [_squeeze(0.0), _squeeze(2.0)])
    A, B = schedule(0.25)
    assert B[0, 0] == pytest.approx(0.5)
    assert schedule(5.0)[1][0, 0] == pytest.approx(2.0)
    with pytest.raises(ContractViolationError):
        GeneratorSchedule([1.0, 0.0], [_squeeze(), _squeeze()])


def test_knot_times_cover_interval():
    knots = GeneratorSchedule.knot_times(0.0, 0.5, per_unit_time=20)
    assert knots[0] == 0.0 and knots[-1] == 0.5
    assert len(knots) == 11


def test_divergence_is_reported():
    with pytest.raises(IntegrationDivergedError) as excinfo:
        evolve_frame(vacuum_frame(1), GeneratorSchedule.constant(_squeeze()), t_final=1.0, dt=0.5, tol=1e-14)
    assert excinfo.value.time > 0.0


def test_sample_times_outside_interval_are_refused():
    with pytest.raises(ContractViolationError):
        evolve_frame(vacuum_frame(1), GeneratorSchedule.constant(_squeeze()), t_final=1.0, dt=0.1, sample_times=[2.0])


def test_growth_report_of_squeezing():
    _, series = evolve_frame(
        vacuum_frame(1), GeneratorSchedule.constant(_squeeze()), t_final=2.0, dt=1e-3,
        sample_times=np.linspace(0.0, 2.0, 21),
    )
    report = growth_report(series)
    assert report.max_particle_number == pytest.approx(math.sinh(2.0) ** 2, rel=1e-4)
    assert report.monotone_fraction == 1.0
    assert set(report.as_dict()) == {
        "max_particle_number", "monotone_fraction", "log_c", "c1", "c2", "max_relative_error",
    }


def test_growth_report_requires_vacuum_start():
    series = ObservableSeries()
    series.record(single_mode_squeeze(1.0, 0.5), 1.0, None)
    with pytest.raises(ContractViolationError):
        growth_report(series)
