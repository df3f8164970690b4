import numpy as np
import pytest
from hypothesis import settings

from grafem.mesh import TetMesh
from grafem.meshing import box_mesh

settings.register_profile("grafem", max_examples=40, deadline=None)
settings.load_profile("grafem")

UNIT_TET_NODES = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture
def unit_tet() -> TetMesh:
    return TetMesh.from_arrays(UNIT_TET_NODES, [[0, 1, 2, 3]])


@pytest.fixture
def two_tets() -> TetMesh:
    X = np.vstack([UNIT_TET_NODES, [[1.0, 1.0, 1.0]]])
    return TetMesh.from_arrays(X, [[0, 1, 2, 3], [1, 2, 3, 4]], reorient=True)


@pytest.fixture
def small_box() -> TetMesh:
    return box_mesh((1.0, 0.5, 0.5), (3, 2, 2))


def random_rotation(rng) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
