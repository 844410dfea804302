"""Integrated evolution-variational-inequality residuals, discrete error
budgets for minimizing-movement trajectories, contraction checks between
approximate flows, and step-size convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropySpec, eval_functional
from .hk import hk_distance_squared, shk_from_hk_squared
from .measures import DiscreteMeasure, scale_measure, uniform_measure
from .mm import MMTrajectory, mm_trajectory


def lambda_star(lam: float) -> float:
    """Corrected convexity parameter used by the discrete estimates."""
    return 2.0 * min(lam, 0.0) - 2.0


def metric_distance_squared(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                            metric: str = "hk", **kw) -> float:
    d2 = hk_distance_squared(mu0, mu1, **kw).hk_squared
    if metric == "shk":
        return shk_from_hk_squared(d2) ** 2
    if metric != "hk":
        raise ValueError(f"unknown metric {metric!r}")
    return d2


def default_observers(mu0: DiscreteMeasure, metric: str = "hk") -> list:
    """Finite-energy observers at nontrivial distances from the data:
    mass rescalings for the transport-growth metric, blends with the
    uniform probability for the spherical one."""
    if metric == "hk":
        return [scale_measure(mu0, math.sqrt(c)) for c in (0.5, 1.0, 2.0)]
    unif = uniform_measure(mu0.domain, 1.0 / mu0.domain.volume)
    return [DiscreteMeasure(mu0.domain,
                            (1.0 - w) * unif.density + w * mu0.density)
            for w in (0.25, 0.5, 0.75)]


@dataclass
class EVIReport:
    observers: list
    times: np.ndarray
    tau: float
    lam: float
    # residuals[k][i, j]: observer k, time pair (t_i, t_j), i <= j
    residuals_lambda_star: list
    residuals_lambda: list
    worst_residual: float
    worst_residual_lambda: float


def evi_residual_matrix(times: np.ndarray, phis: np.ndarray,
                        dists2: np.ndarray, phi_obs: float,
                        lam: float) -> np.ndarray:
    """All-pairs integrated residuals

        R(s,t) = d2(t)/2 - d2(s)/2
                 + int_s^t (phi(x(r)) + lam/2 d2(r)) dr - (t-s) phi(o)

    with trapezoid quadrature on the sample grid.  Additive by
    construction: R(s,u) + R(u,t) = R(s,t)."""
    n = len(times)
    integrand = phis + 0.5 * lam * dists2
    cum = np.zeros(n)
    if n > 1:
        dt = np.diff(times)
        cum[1:] = np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]))
    R = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(i, n):
            R[i, j] = (0.5 * dists2[j] - 0.5 * dists2[i]
                       + (cum[j] - cum[i])
                       - (times[j] - times[i]) * phi_obs)
    return R


def evi_check(traj: MMTrajectory, E: EntropySpec, lam: float,
              metric: str = "hk", observers=None, **solver_kw) -> EVIReport:
    """Integrated EVI residuals of a trajectory against a set of observers,
    reported both with the corrected parameter and with lam itself."""
    if observers is None:
        observers = default_observers(traj.measures[0], metric)
    times = traj.times
    phis = np.array([eval_functional(E, m) for m in traj.measures])
    if not np.all(np.isfinite(phis)):
        raise ValueError("trajectory sample with infinite energy")
    lam_s = lambda_star(lam)
    mats_star, mats_lam = [], []
    worst_star = worst_lam = -math.inf
    for obs in observers:
        phi_o = eval_functional(E, obs)
        d2 = np.array([metric_distance_squared(m, obs, metric, **solver_kw)
                       for m in traj.measures])
        Rs = evi_residual_matrix(times, phis, d2, phi_o, lam_s)
        Rl = evi_residual_matrix(times, phis, d2, phi_o, lam)
        mats_star.append(Rs)
        mats_lam.append(Rl)
        iu = np.triu_indices(Rs.shape[0], k=1)  # diagonal is 0 by identity
        if iu[0].size:
            worst_star = max(worst_star, float(np.max(Rs[iu])))
            worst_lam = max(worst_lam, float(np.max(Rl[iu])))
    return EVIReport(observers, times, traj.tau, lam, mats_star, mats_lam,
                     worst_star, worst_lam)


@dataclass
class ErrorBudget:
    tau: float
    lam: float
    kappa: float
    deltas: np.ndarray          # per-step budget values, clamped at zero
    deltas_zero_gap: np.ndarray # variant with the direction-gap term dropped
    slope_surrogate: float      # d(x0, x1) / tau
    weighted_l1: float          # sum tau e^{2 lam* t_n} Delta_n
    l1_bound: float             # tau (4 + tau kappa) slope^2
    bound_holds: bool


def direction_gap_surrogates(d2_steps: np.ndarray,
                             d2_skips: np.ndarray) -> np.ndarray:
    """Comparison surrogate for the squared gap between the backward and
    forward directions at each interior iterate:
    2 d2(n,n-1) + 2 d2(n,n+1) - d2(n-1,n+1), clamped at zero."""
    gaps = (2.0 * d2_steps[:-1] + 2.0 * d2_steps[1:] - d2_skips)
    return np.maximum(gaps, 0.0)


def error_budget(traj: MMTrajectory, kappa: float, lam: float,
                 metric: str = "hk", slope: float | None = None,
                 **solver_kw) -> ErrorBudget:
    """Per-step incremental errors of the implicit scheme.

    Step zero uses (1 - 2 lam) d2(x0,x1) + (1 + 1/(1 + lam tau)) slope^2;
    later steps use (1 - 2 lam + kappa/tau) d2(xn,xn+1) plus the
    direction-gap surrogate divided by tau^2.  The weighted L1 norm is
    compared against the a-priori bound tau (4 + tau kappa) slope^2.
    """
    tau = traj.tau
    ms = traj.measures
    n_steps = len(ms) - 1
    if n_steps < 1:
        raise ValueError("trajectory needs at least one step")
    d2_steps = np.array([metric_distance_squared(ms[k], ms[k + 1], metric,
                                                 **solver_kw)
                         for k in range(n_steps)])
    d2_skips = np.array([metric_distance_squared(ms[k - 1], ms[k + 1],
                                                 metric, **solver_kw)
                         for k in range(1, n_steps)])
    if slope is None:
        slope = math.sqrt(max(d2_steps[0], 0.0)) / tau
    deltas = np.zeros(n_steps)
    zero_gap = np.zeros(n_steps)
    if 1.0 + lam * tau <= 0:
        raise ValueError("step size too large for this convexity parameter")
    deltas[0] = ((1.0 - 2.0 * lam) * d2_steps[0]
                 + (1.0 + 1.0 / (1.0 + lam * tau)) * slope * slope)
    zero_gap[0] = deltas[0]
    if n_steps > 1:
        gaps = direction_gap_surrogates(d2_steps, d2_skips)
        core = (1.0 - 2.0 * lam + kappa / tau) * d2_steps[1:]
        deltas[1:] = np.maximum(core + gaps / tau**2, 0.0)
        zero_gap[1:] = np.maximum(core, 0.0)
    deltas = np.maximum(deltas, 0.0)
    times = tau * np.arange(n_steps)
    lam_s = lambda_star(lam)
    l1 = float(np.sum(tau * np.exp(2.0 * lam_s * times) * deltas))
    bound = tau * (4.0 + tau * kappa) * slope * slope
    return ErrorBudget(tau, lam, kappa, deltas, zero_gap, float(slope),
                       l1, bound, l1 <= bound * (1.0 + 1e-9) + 1e-12)


@dataclass
class ContractionReport:
    times: np.ndarray
    distances: np.ndarray
    lhs: np.ndarray   # e^{lam* t} d(x1(t), x2(t))
    rhs: float        # d(0) + budget slack
    ok: bool


def contraction_check(traj_a: MMTrajectory, traj_b: MMTrajectory,
                      lam: float, budget_a: ErrorBudget,
                      budget_b: ErrorBudget, metric: str = "hk",
                      slack: float = 1e-9, **solver_kw) -> ContractionReport:
    """Budgeted non-expansion between two approximate flows:
    sup_t e^{lam* t} d(x1(t), x2(t)) <= d(0) + || 2 e^{2 lam* t}
    (Delta_1 + Delta_2) ||_{L1}^{1/2}."""
    if abs(traj_a.tau - traj_b.tau) > 1e-15 \
            or len(traj_a.measures) != len(traj_b.measures):
        raise ValueError("trajectories live on different time grids")
    times = traj_a.times
    d = np.array([math.sqrt(max(metric_distance_squared(
        ma, mb, metric, **solver_kw), 0.0))
        for ma, mb in zip(traj_a.measures, traj_b.measures)])
    lam_s = lambda_star(lam)
    lhs = np.exp(lam_s * times) * d
    step_times = traj_a.tau * np.arange(len(budget_a.deltas))
    l1 = float(np.sum(traj_a.tau * 2.0 * np.exp(2.0 * lam_s * step_times)
                      * (budget_a.deltas + budget_b.deltas)))
    rhs = d[0] + math.sqrt(max(l1, 0.0))
    return ContractionReport(times, d, lhs, rhs,
                             bool(np.all(lhs <= rhs + slack)))


def interpolate_constant_left(traj: MMTrajectory, t: float) -> DiscreteMeasure:
    """Piecewise-constant-in-time interpolant at the left grid node."""
    k = min(int(math.floor(t / traj.tau + 1e-12)), len(traj.measures) - 1)
    return traj.measures[max(k, 0)]


def convergence_study(mu0: DiscreteMeasure, E: EntropySpec,
                      metric: str, tau_list, T: float,
                      **kw) -> list:
    """Sup-distance between interpolants at consecutive step sizes.

    Returns one row per consecutive (tau, tau_next) pair with the sup of
    the metric distance over the finer time grid on [0, T].
    """
    taus = list(tau_list)
    trajs = []
    for tau in taus:
        n = int(round(T / tau))
        trajs.append(mm_trajectory(mu0, tau, n, E, metric=metric, **kw))
    rows = []
    for ta, tb in zip(trajs[:-1], trajs[1:]):
        gap = 0.0
        for t in tb.times:
            d2 = metric_distance_squared(interpolate_constant_left(ta, t),
                                         interpolate_constant_left(tb, t),
                                         metric)
            gap = max(gap, math.sqrt(max(d2, 0.0)))
        rows.append({"tau": ta.tau, "tau_next": tb.tau, "sup_gap": gap})
    return rows
