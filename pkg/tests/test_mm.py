import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hkflow.entropy import (eval_functional, linear_entropy,
                            neg_power_entropy, power_mass_entropy)
from hkflow.measures import DiscreteMeasure, uniform_measure, unit_interval
from hkflow.mm import (check_density_bounds, iterate_lower_bound,
                       iterate_sqrt_growth_bound, iterate_upper_bound,
                       mm_step, mm_trajectory, plan_density_violation,
                       restart_agreement, scalar_lower_bound, scalar_mm_step,
                       scalar_shk_mm_step, scalar_step_monotonicity,
                       scalar_upper_bound, shk_mm_step)

from conftest import sinusoid_measure


def quadratic_entropy():
    return power_mass_entropy(1.0, 2.0, -1.0)


def test_scalar_step_optimality():
    # c1 satisfies 1 - sqrt(c0/c1) + 2 tau E'(c1) = 0
    E = quadratic_entropy()
    c0, tau = 0.8, 0.05
    c1 = scalar_mm_step(c0, tau, E)
    res = 1.0 - math.sqrt(c0 / c1) + 2.0 * tau * float(E.derivative(c1))
    assert abs(res) < 1e-9


def test_scalar_shk_step_is_identity():
    E = quadratic_entropy()
    assert scalar_shk_mm_step(0.37, 0.05, E) == pytest.approx(0.37)


@given(c0=st.floats(0.05, 5.0), tau=st.floats(1e-3, 0.2),
       gamma=st.floats(-2.0, 2.0))
@settings(max_examples=80, deadline=None)
def test_scalar_bounds_d1_to_d4(c0, tau, gamma):
    E = power_mass_entropy(1.0, 2.0, gamma)
    c1 = scalar_mm_step(c0, tau, E)
    # (D1)/(D2): the step moves monotonically toward the derivative root
    mono = scalar_step_monotonicity(c0, c1, tau, E)
    assert mono["decreases_iff_derivative_nonneg"]
    assert mono["increases_iff_derivative_nonpos"]
    # (D3)/(D4): explicit envelope bounds seeded at the input level
    assert c1 >= scalar_lower_bound(c0, tau, E, c0) - 1e-9
    assert c1 <= scalar_upper_bound(c0, tau, E, c0) + 1e-9


def test_scalar_step_fixed_point_at_root():
    # E'(c) = 2c - 1 vanishes at c = 1/2: the step keeps it fixed
    E = quadratic_entropy()
    assert scalar_mm_step(0.5, 0.08, E) == pytest.approx(0.5, abs=1e-10)


def test_scalar_step_decreasing_entropy_family():
    # E' < 0 everywhere: mass can only grow
    E = neg_power_entropy(0.5, 1.0)
    c1 = scalar_mm_step(0.7, 0.05, E)
    assert c1 > 0.7


def test_mm_step_decreases_objective(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33)
    res = mm_step(mu0, 0.05, E)
    assert res.converged
    # objective at the minimizer is at most the stay-put value E(mu0)
    assert res.objective <= eval_functional(E, mu0) + 1e-9
    assert res.distance_squared >= 0.0
    assert eval_functional(E, res.measure) <= eval_functional(E, mu0) + 1e-9


def test_mm_step_stationary_at_entropy_minimizer(interval33):
    E = quadratic_entropy()
    mu0 = uniform_measure(interval33, 0.5)  # E' = 0 here
    res = mm_step(mu0, 0.05, E)
    assert np.max(np.abs(res.measure.density - 0.5)) < 1e-5


def test_uniform_data_matches_scalar_recursion(interval33):
    E = quadratic_entropy()
    tau = 0.05
    c = 0.8
    mu = uniform_measure(interval33, c)
    traj = mm_trajectory(mu, tau, 5, E, metric="hk")
    for k in range(1, 6):
        c = scalar_mm_step(c, tau, E)
        rho = traj.measures[k].density
        assert float(np.max(np.abs(rho - c))) <= 1e-4 * c


def test_uniform_data_constant_under_shk(interval33):
    E = quadratic_entropy()
    mu = uniform_measure(interval33, 1.0)
    traj = mm_trajectory(mu, 0.05, 3, E, metric="shk")
    for m in traj.measures:
        assert float(np.max(np.abs(m.density - 1.0))) <= 1e-6


def test_shk_trajectory_extremes_nested(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=1.0, amplitude=0.3)
    prob = DiscreteMeasure(interval33, mu0.density / mu0.mass)
    traj = mm_trajectory(prob, 0.02, 6, E, metric="shk")
    rep = check_density_bounds(traj, E, metric="shk", slack=1e-6)
    assert rep["ok"]


def test_hk_trajectory_density_bounds(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    traj = mm_trajectory(mu0, 0.05, 6, E, metric="hk")
    rep = check_density_bounds(traj, E, slack=1e-6)
    assert rep["ok"]
    # global envelope: never below min(initial min, c_low)
    floor = iterate_lower_bound(float(np.min(mu0.density)), E.c_low)
    assert all(float(np.min(m.density)) >= floor - 1e-6
               for m in traj.measures)


def test_iterated_bound_formulas():
    # growth envelope: rho_max * exp(8 max(-S, 0) k tau)
    E = quadratic_entropy()
    up0 = iterate_upper_bound(0.6, 0, 0.05, E)
    assert up0 == pytest.approx(0.6)
    up3 = iterate_upper_bound(0.6, 3, 0.05, E)
    assert up3 >= up0
    assert iterate_lower_bound(0.4, 0.25) == pytest.approx(0.25)
    assert iterate_lower_bound(0.2, 0.25) == pytest.approx(0.2)
    g = iterate_sqrt_growth_bound(0.6, 3, 0.05, e_star=1.0, c_star=0.25)
    assert g >= 0.6
    assert iterate_sqrt_growth_bound(0.6, 0, 0.05, 0.0, 0.0) \
        == pytest.approx(0.6)


def test_restart_agreement(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33)
    gap = restart_agreement(mu0, 0.05, E, n_restarts=3, seed=0)
    assert gap <= 1e-5


def test_plan_density_violation_small(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33)
    res = mm_step(mu0, 0.05, E)
    assert plan_density_violation(res, mu0) <= 0.01


def test_density_cap_limits_growth(interval33):
    # pure mass creation drive with a hard ceiling at density one
    E = linear_entropy(-2.0)
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.2)
    traj = mm_trajectory(mu0, 0.05, 4, E, metric="hk", density_cap=1.0)
    for m in traj.measures:
        assert float(np.max(m.density)) <= 1.0 + 1e-9


def test_trajectory_bookkeeping(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33)
    traj = mm_trajectory(mu0, 0.05, 3, E)
    assert len(traj.measures) == 4
    assert len(traj.distances_squared) == 3
    assert len(traj.plans) == 3
    assert np.allclose(traj.times, [0.0, 0.05, 0.1, 0.15])
    assert traj.slope_surrogates.shape == (3,)
    energies = traj.energy(E)
    assert np.all(np.diff(energies) <= 1e-9)
