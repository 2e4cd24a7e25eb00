import numpy as np
import pytest

from bilinear_schrodinger.controls import ControlSignal, fourier_moment
from bilinear_schrodinger.coupling import CouplingMatrix
from bilinear_schrodinger.errors import IllConditioned, ObstructedState, ValidationError
from bilinear_schrodinger.moments import (MomentTable, identity_residual, linearized_endpoint, obstruction_invariant,
                                          synthesize_control, target_to_moments)
from bilinear_schrodinger.propagator import linearized_propagate
from bilinear_schrodinger.spectral import Potential, StateCoeffs, hs_norm, solve_sturm_liouville

from conftest import random_state, random_tangent


def dense_constraints(c, q):
    """Real linear map x -> residual pieces of -i sum_k c_k q_mk d_mk for Hermitian d with constant diagonal.

    Unknowns x = (d0, Re d_mk, Im d_mk for m < k).
    """
    n = c.size
    pairs = [(m, k) for m in range(n) for k in range(m + 1, n)]
    cols = []
    basis = [np.eye(n, dtype=complex)]
    for m, k in pairs:
        e = np.zeros((n, n), dtype=complex)
        e[m, k] = e[k, m] = 1
        basis.append(e)
    for m, k in pairs:
        e = np.zeros((n, n), dtype=complex)
        e[m, k], e[k, m] = 1j, -1j
        basis.append(e)
    for d in basis:
        v = -1j * (q * d) @ c
        cols.append(np.r_[v.real, v.imag])
    return np.array(cols).T, basis


def test_case1_single_mode(ramp_system, ramp_coupling):
    E, C = ramp_system, ramp_coupling
    z = StateCoeffs.basis(E, 1)
    y = z * 1j
    M = target_to_moments(z, y, C)
    assert M.case == 1
    # the defining identity -i q11 d0 = i forces d0 = -1/q11
    assert M.d0 == pytest.approx(-1 / C.q[0, 0], rel=1e-12)
    assert identity_residual(z, y, C, M) <= 1e-12


def test_two_mode_degenerate_raises(ramp_system, ramp_coupling):
    C = ramp_coupling
    q = C.q
    a = np.sqrt(q[1, 1] / (q[0, 0] + q[1, 1]))
    c = np.zeros(C.n, dtype=complex)
    c[0], c[1] = a, np.sqrt(1 - a * a)
    z = StateCoeffs(c, ramp_system)
    y = random_tangent(z, np.random.default_rng(1), [0, 1, 2])
    with pytest.raises(ObstructedState):
        target_to_moments(z, y, C)


def test_symmetric_two_mode_with_equal_diagonal_raises():
    C = CouplingMatrix.from_arrays([[1.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 2.0]], [1.0, 4.0, 9.5])
    E = solve_sturm_liouville(Potential.preset("zero"), 3)
    z = StateCoeffs(np.array([1, 1, 0], dtype=complex) / np.sqrt(2), E)
    y = z.with_coeffs(np.array([0.1j, 0.2j, 0.3]))
    with pytest.raises(ObstructedState):
        target_to_moments(z, y, C)


@pytest.mark.parametrize("modes", [[0, 1], [0, 1, 2], [2, 5, 7, 9], list(range(12))])
def test_identity_and_dense_oracle(ramp_system, ramp_coupling, rng, modes):
    C = ramp_coupling
    for _ in range(5):
        z = random_state(ramp_system, rng, modes)
        y = random_tangent(z, rng)
        M = target_to_moments(z, y, C)
        A, basis = dense_constraints(z.coeffs, C.q)
        b = np.r_[y.coeffs.real, y.coeffs.imag]
        # the constraints are solvable
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * (1 + np.linalg.norm(b))
        # and our table is one solution: expand it in the same unknowns
        n = C.n
        iu = np.triu_indices(n, 1)
        ours = np.r_[M.d0, M.d[iu].real, M.d[iu].imag]
        assert np.linalg.norm(A @ ours - b) <= 1e-10 * (1 + np.linalg.norm(b))
        assert identity_residual(z, y, C, M) <= 1e-10 * (1 + np.linalg.norm(y.coeffs))
        assert np.array_equal(M.d, M.d.conj().T)
        assert np.all(np.diag(M.d) == M.d0)
        assert M.case == min(len(modes), 3)


def test_scaling_linearity(ramp_system, ramp_coupling, rng):
    z = random_state(ramp_system, rng, [0, 1, 2, 3])
    y = random_tangent(z, rng)
    M1 = target_to_moments(z, y, ramp_coupling)
    M2 = target_to_moments(z, y * -2.5, ramp_coupling)
    np.testing.assert_allclose(M2.d, -2.5 * M1.d, atol=1e-10 * np.abs(M1.d).max())


def test_preconditions(ramp_system, ramp_coupling):
    z = StateCoeffs.basis(ramp_system, 1)
    with pytest.raises(ValidationError):
        target_to_moments(z, z, ramp_coupling)  # not tangent
    with pytest.raises(ValidationError):
        target_to_moments(z * 2.0, z * 1j, ramp_coupling)
    with pytest.raises(ValidationError):
        MomentTable(np.array([[0, 1], [2, 0]]), 0.0, np.zeros((2, 2)))


def test_zero_table_gives_zero_control(ramp_coupling):
    M = MomentTable(np.zeros((12, 12)), 0.0, ramp_coupling.omega)
    u, rep = synthesize_control(M, 40.0, 200)
    assert np.all(u.weights == 0) and rep.max_residual == 0


def test_single_moment_against_direct_lstsq():
    om = np.array([[0.0, -1.0], [1.0, 0.0]])
    M = MomentTable(np.array([[0, 1], [1, 0]]), 0.0, om)
    u, rep = synthesize_control(M, 20.0, 100)
    assert rep.max_residual <= 1e-8
    assert abs(fourier_moment(u, 1.0) - 1) <= 1e-8 and abs(fourier_moment(u, 0.0)) <= 1e-8


def test_synthesis_consistency(ramp_system, ramp_coupling, rng):
    C = ramp_coupling
    z = StateCoeffs.basis(ramp_system, 1)
    y = random_tangent(z, rng, [0, 1, 2, 3])
    y = y * (1e-3 / hs_norm(y, 3))
    M = target_to_moments(z, y, C)
    u, rep = synthesize_control(M, 40.0, 200)
    om, tg = M.representatives()
    got = fourier_moment(u, om)
    assert np.max(np.abs(got - tg)) <= rep.max_residual * (1 + 1e-6) + 1e-15
    assert rep.max_residual <= 1e-6
    R = linearized_endpoint(z, u, C)
    assert hs_norm(R - y, 3) <= 1e-4
    assert abs(np.real(R.inner(z))) <= 1e-9
    assert np.all(np.isfinite(list(rep.theta.values())[:4]))


def test_linearized_endpoint_eigenstate(ramp_system, ramp_coupling, rng):
    C = ramp_coupling
    u = ControlSignal.random_bumps(10.0, 20, rng)
    for k in (0, 3):
        R = linearized_endpoint(StateCoeffs.basis(ramp_system, k + 1), u, C)
        expect = -1j * C.q[:, k] * fourier_moment(u, C.omega[:, k])
        np.testing.assert_allclose(R.coeffs, expect, atol=1e-13)
    assert np.all(linearized_endpoint(StateCoeffs.basis(ramp_system, 1), ControlSignal.zero(5.0), C).coeffs == 0)


def test_ill_conditioned_raises(ramp_coupling):
    M = MomentTable(np.zeros((12, 12)), 1.0, ramp_coupling.omega)
    with pytest.raises(IllConditioned):
        synthesize_control(M, 5.0, 3, rho=0.0)


def test_resonant_duplicates():
    om = np.array([[0.0, -1.0, -1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    same = MomentTable(np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]]), 0.0, om)
    u, rep = synthesize_control(same, 20.0, 100)
    assert rep.n_constraints == 2
    diff = MomentTable(np.array([[0, 1, 2], [1, 0, 0], [2, 0, 0]]), 0.0, om)
    with pytest.raises(ValidationError):
        synthesize_control(diff, 20.0, 100)


def test_obstruction_invariant(ramp_system, ramp_coupling, rng):
    C = ramp_coupling
    q = C.q
    a = np.sqrt(q[1, 1] / (q[0, 0] + q[1, 1]))
    c = np.zeros(C.n, dtype=complex)
    c[0], c[1] = a, np.sqrt(1 - a * a) * np.exp(0.7j)
    on = StateCoeffs(c, ramp_system)
    off = StateCoeffs(np.r_[0.9, np.sqrt(0.19), np.zeros(10)].astype(complex), ramp_system)
    u = ControlSignal.random_bumps(20.0, 40, rng)
    s_on = obstruction_invariant(linearized_propagate(on, u, C, 20.0, 1e-3), on, 1, 2)
    s_off = obstruction_invariant(linearized_propagate(off, u, C, 20.0, 1e-3), off, 1, 2)
    assert np.ptp(s_on) <= 1e-8
    assert np.ptp(s_off) >= 1e-3
    zero = obstruction_invariant(linearized_propagate(on, None, C, 5.0, 1e-2), on, 1, 2)
    assert np.all(zero == 0)
    with pytest.raises(ValidationError):
        obstruction_invariant(linearized_propagate(on, None, C, 1.0, 1e-1), random_state(ramp_system, rng), 1, 2)
