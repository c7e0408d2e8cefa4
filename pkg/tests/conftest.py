import pytest

from qground.params import Params
from qground.shooting import solve_ground_state


@pytest.fixture(scope="session")
def nls33():
    """Cubic NLS ground state in 3D (delta = 0, omega = 1)."""
    return solve_ground_state(Params(3, 3, 0.0, 1.0))


@pytest.fixture(scope="session")
def townes():
    """Cubic NLS ground state in 2D (the mass-critical case)."""
    return solve_ground_state(Params(2, 3, 0.0, 1.0))


@pytest.fixture(scope="session")
def crit3():
    """Critical quasilinear ground state, N = 3, p = 5, small omega."""
    return solve_ground_state(Params(3, 5, 1.0, 2.0 ** -6))


@pytest.fixture(scope="session")
def sub32():
    """Subcritical quasilinear ground state, N = 3, p = 2."""
    return solve_ground_state(Params(3, 2, 1.0, 1.0))


@pytest.fixture(scope="session")
def super53():
    """Supercritical quasilinear ground state, N = 5, p = 3."""
    return solve_ground_state(Params(5, 3, 1.0, 0.05))


@pytest.fixture(scope="session")
def zero_mass53():
    """Zero-mass (omega = 0) solution, N = 5, p = 3."""
    return solve_ground_state(Params(5, 3, 1.0, 0.0))
