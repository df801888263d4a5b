import numpy as np
import pytest

from discretize.grid import box_grid
from geometry.gap import GapGeometry


@pytest.fixture
def balls3d():
    return GapGeometry.balls(1.0, 0.01, 0.5, 1.0, 3)


@pytest.fixture
def disks2d():
    return GapGeometry.balls(1.0, 0.01, 0.5, 1.0, 2)


@pytest.fixture
def quad_iso():
    return GapGeometry.quadratic(np.eye(2), 0.02, 0.5, 1.0)


@pytest.fixture
def quad_aniso():
    return GapGeometry.quadratic(np.diag([1.0, 4.0]), 0.01, 0.5, 1.0)


@pytest.fixture
def small_box():
    return box_grid(2, 1.0, 0.5, 16, 8)


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "results")


@pytest.fixture
def write_scenario(tmp_path):
    def write(text: str, name: str = "scenario.cfg") -> str:
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write
