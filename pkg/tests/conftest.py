import numpy as np
import pytest

from bilinear_schrodinger.coupling import coupling_matrix
from bilinear_schrodinger.spectral import Potential, StateCoeffs, solve_sturm_liouville


@pytest.fixture(scope="session")
def free_system():
    return solve_sturm_liouville(Potential.preset("zero"), 32)


@pytest.fixture(scope="session")
def x2():
    return Potential.preset("quadratic", a=1.0)


@pytest.fixture(scope="session")
def ramp_system():
    # V = 10x keeps the 12-mode spectrum free of resonances
    return solve_sturm_liouville(Potential.preset("linear", slope=10.0), 12)


@pytest.fixture(scope="session")
def ramp_coupling(ramp_system, x2):
    return coupling_matrix(x2, ramp_system)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(system, rng, modes=None):
    n = system.n_modes
    c = np.zeros(n, dtype=complex)
    idx = np.arange(n) if modes is None else np.asarray(modes)
    c[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    return StateCoeffs(c / np.linalg.norm(c), system)


def random_tangent(ztilde, rng, modes=None, scale=1.0):
    n = ztilde.coeffs.size
    y = np.zeros(n, dtype=complex)
    idx = np.arange(n) if modes is None else np.asarray(modes)
    y[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    y -= np.real(np.vdot(ztilde.coeffs, y)) * ztilde.coeffs
    return ztilde.with_coeffs(scale * y)


ACCEPTANCE = []


@pytest.fixture
def accept():
    """Record one acceptance line; the terminal summary repeats them all."""
    def record(number, name, ok, detail):
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
