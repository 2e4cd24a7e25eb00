import numpy as np
import pytest
from scipy.optimize import brentq

from bilinear_schrodinger.errors import Diverged, ValidationError
from bilinear_schrodinger.spectral import StateCoeffs, hs_norm
from bilinear_schrodinger.steering import SteeringConfig, lift, newton_control, project_tangent

from conftest import random_state, random_tangent


def target_at(z0, dirn, dist, measure):
    f = lambda a: (z0 + dirn * a).normalized()  # noqa: E731
    a = brentq(lambda a: measure(f(a) - z0) - dist, 1e-10, 1.0)
    return f(a)


@pytest.fixture(scope="module")
def near_run(ramp_system, ramp_coupling):
    z0 = StateCoeffs.basis(ramp_system, 1)
    dirn = StateCoeffs.from_modes(ramp_system, {1: 1j, 2: 1})
    z1 = target_at(z0, dirn, 1e-3, lambda d: hs_norm(d, 3))
    return z0, z1, newton_control(z0, z1, ramp_coupling)


def test_project_tangent_examples(ramp_system, rng):
    zt = random_state(ramp_system, rng)
    assert project_tangent(zt, zt).l2_norm() <= 1e-15
    iz = zt * 1j
    np.testing.assert_allclose(project_tangent(iz, zt).coeffs, iz.coeffs, atol=1e-15)
    for _ in range(20):
        z = random_state(ramp_system, rng)
        assert abs(np.real(project_tangent(z, zt).inner(zt))) <= 1e-14


def test_lift_examples_and_chart(ramp_system, rng):
    zt = random_state(ramp_system, rng, [0, 1, 2])
    assert np.array_equal(lift(zt * 0.0, zt).coeffs, zt.coeffs)
    for r in (1e-6, 0.1, 0.45):
        w = random_tangent(zt, rng)
        w = w * (r / w.l2_norm())
        z = lift(w, zt)
        assert abs(z.l2_norm() - 1) <= 1e-12
        assert np.max(np.abs(project_tangent(z, zt).coeffs - w.coeffs)) <= 1e-12
    with pytest.raises(ValidationError):
        lift(w * 2.0, zt)
    with pytest.raises(ValidationError):
        lift(zt * 0.1, zt)


def test_identical_states_converge_immediately(ramp_system, ramp_coupling):
    z0 = StateCoeffs.basis(ramp_system, 1)
    run = newton_control(z0, z0, ramp_coupling)
    assert run.status == "converged" and len(run.iterates) == 1
    assert np.all(run.control.weights == 0) and run.errors == [0.0]


def test_near_target_contracts(near_run):
    z0, z1, run = near_run
    assert run.status == "converged"
    e = run.errors
    assert e[-1] <= 1e-7 and e[-1] <= e[0] / 10
    assert all(b <= 0.7 * a for a, b in zip(e, e[1:]))
    assert run.iterates[-1].theta_norm < 1
    assert not run.outside_local_regime
    for it in run.iterates:
        assert abs(np.linalg.norm(it.endpoint) - 1) <= 1e-9
        step = project_tangent(z1.with_coeffs(z1.coeffs - it.endpoint), z0)
        assert abs(np.real(step.inner(z0))) <= 1e-9
    assert '"error_h3"' in run.to_json()


def test_global_phase_invariance(near_run, ramp_coupling):
    z0, z1, run = near_run
    rotated = newton_control(z0, z1 * np.exp(5e-4j), ramp_coupling)
    assert rotated.status == "converged"
    assert abs(rotated.errors[-1] - run.errors[-1]) <= 1e-7


def test_far_target_is_not_silent(ramp_system, ramp_coupling):
    z0 = StateCoeffs.basis(ramp_system, 1)
    dirn = StateCoeffs.from_modes(ramp_system, {1: 1j, 2: 1})
    z1 = target_at(z0, dirn, 0.3, lambda d: d.l2_norm())
    with pytest.raises(Diverged) as info:
        newton_control(z0, z1, ramp_coupling, SteeringConfig(max_iter=6))
    run = info.value.run
    assert run.status == "diverged" and run.outside_local_regime
    assert run.errors[-1] > run.errors[0] / 10


def test_rejects_off_sphere(ramp_system, ramp_coupling):
    z0 = StateCoeffs.basis(ramp_system, 1)
    with pytest.raises(ValidationError):
        newton_control(z0, z0 * 1.1, ramp_coupling)
