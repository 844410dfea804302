import math

import numpy as np
import pytest

from hkflow.entropy import eval_functional, power_mass_entropy
from hkflow.evi import (contraction_check, convergence_study, error_budget,
                        evi_check, evi_residual_matrix,
                        interpolate_constant_left, lambda_star)
from hkflow.measures import DiscreteMeasure, uniform_measure, unit_interval
from hkflow.mm import MMTrajectory, mm_trajectory

from conftest import sinusoid_measure


def quadratic_entropy():
    return power_mass_entropy(1.0, 2.0, -1.0)


def test_lambda_star():
    assert lambda_star(-2.0) == pytest.approx(-6.0)
    assert lambda_star(0.0) == pytest.approx(-2.0)
    assert lambda_star(3.0) == pytest.approx(-2.0)


def test_residual_matrix_additive():
    times = np.array([0.0, 0.1, 0.2, 0.3])
    rng = np.random.default_rng(1)
    phis = rng.normal(size=4)
    d2 = rng.uniform(0.1, 1.0, size=4)
    R = evi_residual_matrix(times, phis, d2, phi_obs=0.3, lam=-2.0)
    # diagonal vanishes, entries add along the time axis
    assert np.allclose(np.diag(R), 0.0)
    assert R[0, 3] == pytest.approx(R[0, 1] + R[1, 3], abs=1e-12)
    assert R[0, 2] == pytest.approx(R[0, 1] + R[1, 2], abs=1e-12)


def test_stationary_trajectory_residual_zero(interval33):
    # the entropy minimizer stays put; every residual reduces to
    # -(t - s) (phi(obs) - phi(min)) - lam/2 d^2 terms <= 0, and for the
    # minimizer itself as observer it is exactly zero
    E = quadratic_entropy()
    mu = uniform_measure(interval33, 0.5)
    traj = MMTrajectory(0.05, [mu] * 5, [0.0] * 4, [
        eval_functional(E, mu)] * 4)
    rep = evi_check(traj, E, lam=-2.0, observers=[mu])
    assert abs(rep.worst_residual) <= 1e-8


def test_evi_residuals_negative_on_flow(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.8, amplitude=0.5)
    traj = mm_trajectory(mu0, 0.02, 5, E, metric="hk")
    rep = evi_check(traj, E, lam=-2.0)
    assert rep.worst_residual <= 1e-6
    # the corrected parameter is the weaker requirement
    assert rep.worst_residual <= rep.worst_residual_lambda + 1e-12


def test_residual_shrinks_with_tau(interval33):
    # data strong enough that the residual signal dominates solver noise
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.8, amplitude=0.5)
    worsts = []
    for tau in (0.08, 0.04):
        n = int(round(0.16 / tau))
        traj = mm_trajectory(mu0, tau, n, E, metric="hk")
        rep = evi_check(traj, E, lam=-2.0)
        assert rep.worst_residual <= 1e-6
        worsts.append(abs(rep.worst_residual))
    assert worsts[0] / worsts[1] >= 1.2


def test_error_budget_l1_bound(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    traj = mm_trajectory(mu0, 0.02, 5, E, metric="hk")
    budget = error_budget(traj, kappa=2.0, lam=-2.0)
    assert budget.bound_holds
    assert np.all(budget.deltas >= 0.0)
    assert np.all(budget.deltas_zero_gap <= budget.deltas + 1e-15)
    with pytest.raises(ValueError):
        error_budget(traj, kappa=2.0, lam=-60.0)


def test_contraction_identical_trajectories(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    traj = mm_trajectory(mu0, 0.02, 4, E, metric="hk")
    budget = error_budget(traj, kappa=2.0, lam=-2.0)
    rep = contraction_check(traj, traj, lam=-2.0, budget_a=budget,
                            budget_b=budget)
    assert rep.ok
    # self-distances are solver noise only
    assert np.max(rep.distances) <= 1e-4
    assert np.all(rep.lhs <= rep.rhs + 1e-9)


def test_contraction_perturbed_trajectories(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    mu1 = sinusoid_measure(interval33, base=0.52, amplitude=0.08)
    traj_a = mm_trajectory(mu0, 0.02, 4, E, metric="hk")
    traj_b = mm_trajectory(mu1, 0.02, 4, E, metric="hk")
    ba = error_budget(traj_a, kappa=2.0, lam=-2.0)
    bb = error_budget(traj_b, kappa=2.0, lam=-2.0)
    rep = contraction_check(traj_a, traj_b, lam=-2.0, budget_a=ba,
                            budget_b=bb)
    assert rep.ok


def test_interpolant_left_constant(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    traj = mm_trajectory(mu0, 0.1, 3, E)
    assert interpolate_constant_left(traj, 0.0) is traj.measures[0]
    assert interpolate_constant_left(traj, 0.15) is traj.measures[1]
    assert interpolate_constant_left(traj, 5.0) is traj.measures[3]


def test_convergence_study_rows(interval33):
    E = quadratic_entropy()
    mu0 = sinusoid_measure(interval33, base=0.5, amplitude=0.1)
    rows = convergence_study(mu0, E, "hk", [0.04, 0.02], T=0.08)
    assert len(rows) == 1
    assert rows[0]["tau"] == pytest.approx(0.04)
    assert rows[0]["tau_next"] == pytest.approx(0.02)
    assert rows[0]["sup_gap"] >= 0.0
