import cmath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilinear_schrodinger.errors import ValidationError
from bilinear_schrodinger.propagator import free_evolution
from bilinear_schrodinger.return_times import find_return_time, return_defect, verify_return
from bilinear_schrodinger.spectral import Potential, StateCoeffs, hs_norm, solve_sturm_liouville

from conftest import random_state


def brute_force(lambdas, eps, k_max):
    for k in range(1, k_max + 1):
        d = sum(abs(cmath.exp(-1j * lam * k) - 1) for lam in lambdas)
        if d < eps:
            return k, d
    return None


def test_exact_periods():
    r = find_return_time(2 * np.pi * np.array([1.0, 3.0, 7.0]), 1e-9, 100)
    assert r.found and r.k == 1 and r.defect == pytest.approx(0.0, abs=1e-12)
    r = find_return_time([2 * np.pi / 3], 1e-9, 100)
    assert r.found and r.k == 3 and r.defect == pytest.approx(0.0, abs=1e-12)


def test_free_triplet_matches_scan_oracle():
    lam = np.pi**2 * np.array([1.0, 4.0, 9.0])
    r = find_return_time(lam, 0.1, 10**6)
    assert r.found and r.defect < 0.1
    k, d = brute_force(lam, 0.1, 10**4)
    assert r.k == k and r.defect == pytest.approx(d, abs=1e-9)


def test_not_found_is_flagged():
    r = find_return_time([1.0, np.sqrt(2), np.sqrt(3)], 1e-9, 50)
    assert not r.found and 1 <= r.k <= 50
    assert r.defect == pytest.approx(min(return_defect([1.0, np.sqrt(2), np.sqrt(3)], k) for k in range(1, 51)))


def test_validation():
    with pytest.raises(ValidationError):
        find_return_time([1.0], 0.0, 10)
    with pytest.raises(ValidationError):
        find_return_time([1.0], 0.1, 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 50), min_size=1, max_size=6), st.lists(st.integers(-5, 5), min_size=6, max_size=6),
       st.integers(1, 500))
def test_defect_invariant_under_2pi_shifts(lam, m, k):
    lam = np.array(lam)
    shifted = lam + 2 * np.pi * np.array(m[:lam.size])
    assert return_defect(lam, k) == pytest.approx(return_defect(shifted, k), abs=1e-9)


def test_gauge_shift_is_divided_out():
    lam = np.pi**2 * np.array([1.0, 4.0, 9.0])
    a = find_return_time(lam, 0.1, 10**5)
    b = find_return_time(lam + 0.37, 0.1, 10**5, gauge_shift=0.37)
    assert a.k == b.k and a.defect == pytest.approx(b.defect, abs=1e-9)


def test_verify_return_examples(free_system):
    z = StateCoeffs.basis(free_system, 1)
    k = 5
    rep = verify_return(z, k, 3.0)
    assert rep["value"] == pytest.approx(abs(np.exp(-1j * np.pi**2 * k) - 1) * np.pi**3, rel=1e-9)
    E = solve_sturm_liouville(Potential.preset("zero"), 4)
    lam = E.lambdas
    two_pi = StateCoeffs(np.array([1, 0, 0, 0], dtype=complex), E)
    r = find_return_time(lam[:1], 1e-9, 1000)
    if r.found:
        assert verify_return(two_pi, r.k)["value"] <= 1e-6 * np.pi**3


def test_verify_return_matches_free_evolution(free_system, rng):
    z = random_state(free_system, rng, range(8))
    rep = verify_return(z, 17, 3.0)
    direct = hs_norm(free_evolution(z, 17) - z, 3)
    assert rep["value"] == pytest.approx(direct, rel=1e-8)


def test_bound_decomposition(rng):
    E = solve_sturm_liouville(Potential.preset("linear", slope=10.0), 8)
    for trial in range(5):
        c = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) / np.arange(1, 9) ** 4
        z = StateCoeffs(c / np.linalg.norm(c), E)
        r = find_return_time(E.lambdas[:3], 0.1, 10**6, gauge_shift=E.gauge_shift)
        rep = verify_return(z, r.k, 3.0, n_head=3)
        # independent recomputation of the bound
        w = E.lambdas ** 1.5
        head_err = max(abs(np.exp(-1j * (E.lambdas[j] - E.gauge_shift) * r.k) - 1) for j in range(3))
        bound = head_err * np.linalg.norm(w[:3] * z.coeffs[:3]) + 2 * np.linalg.norm(w[3:] * z.coeffs[3:])
        assert rep["bound"] == pytest.approx(bound, rel=1e-8)
        assert rep["value"] <= rep["bound"] * (1 + 1e-12)
