import numpy as np
import pytest

from phasebundle import linear_structures as ls
from phasebundle import parameter_geometry as pg

OCTANT = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
# Right-angled at the apex, with legs of length arccosh(sqrt 3): angles (pi/2, pi/6, pi/6).
H2_TRIANGLE = [(1.0, 0.0, 0.0), (np.sqrt(3.0), np.sqrt(2.0), 0.0), (np.sqrt(3.0), 0.0, np.sqrt(2.0))]


@pytest.fixture(scope="session")
def quat2():
    return ls.standard_triple(ls.QUATERNIONIC, 2)


@pytest.fixture(scope="session")
def para1():
    return ls.standard_triple(ls.PARAQUATERNIONIC, 1)


@pytest.fixture(scope="session")
def octant_loop(quat2):
    """The octant loop in J-space, roughly 10^4 steps."""
    return pg.polygon_loop(pg.SPHERE, OCTANT, 3334).to_structures(quat2)


def random_unit(rng, kind):
    if kind == pg.SPHERE:
        v = rng.normal(size=3)
        return v / np.linalg.norm(v)
    v = rng.normal(size=2)
    return np.array([np.sqrt(1 + v @ v), v[0], v[1]])


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    """Print and keep one pass/fail line for an acceptance criterion, then assert it."""
    line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
