import numpy as np
import pytest

from fgcalib import lie

# lines recorded by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def hat(xi):
    """4x4 twist matrix, independent of the package's exp."""
    w, r = np.asarray(xi[:3]), np.asarray(xi[3:])
    H = np.zeros((4, 4))
    H[:3, :3] = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    H[:3, 3] = r
    return H


def random_twist(rng, max_angle=3.0, trans_scale=1.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return np.concatenate([axis * rng.uniform(0.0, max_angle), rng.normal(scale=trans_scale, size=3)])


def pose_close(a: lie.Pose, b: lie.Pose, tol: float) -> bool:
    return np.allclose(a.matrix(), b.matrix(), atol=tol, rtol=0.0)
