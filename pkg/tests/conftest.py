import os
import sys

import pytest

SRC_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src")
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)

from physics.fields import Grid, gaussian_condensate  # noqa: E402
from physics.scattering import solve_neumann, square_well  # noqa: E402


@pytest.fixture
def small_grid():
    """1d grid on which N = 4 with beta = 1/2 is resolvable (R N^-beta = 0.5 > 2 dx)."""
    return Grid(dim=1, points=32, length=6.0)


@pytest.fixture
def condensate(small_grid):
    return gaussian_condensate(small_grid, width=0.5)


@pytest.fixture
def well():
    return square_well(v0=1.0, radius=1.0)


@pytest.fixture(scope="session")
def neumann_solution():
    return solve_neumann(square_well(1.0, 1.0), N=4.0, beta=0.5, ell=1.0)


@pytest.fixture
def write_config(tmp_path):
    """Writes an experiment file from a {section: {key: value}} dictionary."""

    def _write(sections, name="experiment.cfg"):
        lines = []
        for section, values in sections.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in values.items())
            lines.append("")
        path = tmp_path / name
        path.write_text("\n".join(lines), encoding="utf-8")
        return str(path)

    return _write
