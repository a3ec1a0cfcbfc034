import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tivisco.fixtures import load_material

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    """Shipped 24-mode material."""
    return load_material()


@pytest.fixture(scope="session")
def params1():
    """Shipped material reduced to a single mode."""
    return load_material(single_mode=True)


def fiber(theta_deg):
    th = np.radians(theta_deg)
    return np.array([np.cos(th), np.sin(th), 0.0])


def random_F(rng, scale=0.05, n=None):
    shape = (3, 3) if n is None else (n, 3, 3)
    return np.eye(3) + scale * rng.standard_normal(shape)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def verdict():
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE, key=lambda x: x[0]):
            terminalreporter.write_line(line)
