"""Hellinger-Kantorovich distances on discrete grids.

The squared distance is computed through the convex entropy-transport
program

    min_H  sum_i F(s0_i) a_i + sum_j F(s1_j) b_j + sum_ij cost_ij H_ij

over nonnegative coupling matrices H, where a, b are the node masses of
the two inputs, s0 = H 1 / a and s1 = H^T 1 / b are the marginal density
ratios, F(r) = r log r - r + 1, and cost(R) = -2 log cos R for R < pi/2
(infinite otherwise).

Two solvers are provided: a log-domain scaling iteration with a
decreasing regularization schedule (any support size), and a damped
Newton interior-point solver for supports of at most eight nodes used as
a high-precision cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import xlogy

from .measures import DiscreteMeasure, GridDomain

HALF_PI = 0.5 * math.pi

DEFAULT_EPS_SCHEDULE = tuple(np.geomspace(1e-1, 1e-6, 11))


@lru_cache(maxsize=32)
def _domain_cost(domain: GridDomain) -> np.ndarray:
    return transport_cost(domain.distance_matrix())


def transport_cost(distances: np.ndarray) -> np.ndarray:
    """-2 log cos d for d below pi/2, +inf at and beyond it."""
    d = np.asarray(distances, dtype=float)
    out = np.full(d.shape, np.inf)
    ok = d < HALF_PI - 1e-15
    out[ok] = -2.0 * np.log(np.cos(d[ok]))
    return out


def entropy_divergence(sigma: np.ndarray) -> np.ndarray:
    """F(r) = r log r - r + 1 with F(0) = 1."""
    s = np.asarray(sigma, dtype=float)
    return xlogy(s, s) - s + 1.0


def let_cost(plan: np.ndarray, a: np.ndarray, b: np.ndarray,
             cost: np.ndarray) -> float:
    """Entropy-transport objective of a coupling against node masses a, b."""
    r = plan.sum(axis=1)
    s = plan.sum(axis=0)
    val = float(np.sum(xlogy(r, r) - xlogy(r, a) - r) + a.sum()
                + np.sum(xlogy(s, s) - xlogy(s, b) - s) + b.sum())
    finite = np.isfinite(cost)
    val += float(np.sum(plan[finite] * cost[finite]))
    if np.any(plan[~finite] > 0):
        return math.inf
    return val


@dataclass
class HKResult:
    """Solver output: squared distance plus certificates.

    ``dual_value`` is the regularized dual objective at the returned
    potentials (a smooth surrogate of the squared distance) and
    ``target_slope`` its exact derivative with respect to each target
    node mass; together they give consistent value/gradient pairs for
    outer optimizations over the target measure.
    """

    hk_squared: float
    plan: np.ndarray
    potential_source: np.ndarray
    potential_target: np.ndarray
    marginal_error: float
    iterations: int
    converged: bool
    eps_final: float = 0.0
    dual_value: float = 0.0
    target_slope: np.ndarray | None = None

    @property
    def hk(self) -> float:
        return math.sqrt(max(self.hk_squared, 0.0))


def _dual_newton(a, b, cost, eps_schedule, max_iter, tol, f0=None, g0=None):
    """Damped Newton maximization of the regularized dual

        D(f, g) = sum a (1 - e^-f) + sum b (1 - e^-g)
                  - eps (sum H - sum a sum b),
        H_ij = a_i b_j exp((f_i + g_j - c_ij) / eps),

    continued along a decreasing regularization schedule.  The dual is
    smooth and strictly concave, so warm-started solves converge in a
    handful of steps even at small eps.
    """
    n, m = cost.shape
    log_a = np.log(a)
    log_b = np.log(b)
    ab = float(a.sum() * b.sum())

    def plan_of(f, g, eps):
        log_plan = (log_a[:, None] + log_b[None, :]
                    + (f[:, None] + g[None, :] - cost) / eps)
        return np.exp(np.minimum(log_plan, 500.0))

    def dual(f, g, eps, H):
        return (float(a @ (1.0 - np.exp(-f)) + b @ (1.0 - np.exp(-g)))
                - eps * (float(H.sum()) - ab))

    f = np.zeros(n) if f0 is None else np.asarray(f0, float).copy()
    g = np.zeros(m) if g0 is None else np.asarray(g0, float).copy()
    total = 0
    eps = eps_schedule[-1]
    gnorm = math.inf
    for eps in eps_schedule:
        for _ in range(max_iter):
            H = plan_of(f, g, eps)
            r = H.sum(axis=1)
            s = H.sum(axis=0)
            ea = a * np.exp(-f)
            eb = b * np.exp(-g)
            grad = np.concatenate([ea - r, eb - s])
            gnorm = float(np.max(np.abs(grad)))
            if gnorm < tol:
                break
            M = np.zeros((n + m, n + m))
            M[:n, :n] = np.diag(ea + r / eps)
            M[n:, n:] = np.diag(eb + s / eps)
            M[:n, n:] = H / eps
            M[n:, :n] = H.T / eps
            try:
                step = cho_solve(cho_factor(M), grad)
            except np.linalg.LinAlgError:
                step = np.linalg.solve(M + 1e-12 * np.eye(n + m), grad)
            val = dual(f, g, eps, H)
            t = 1.0
            while t > 1e-13:
                fn = f + t * step[:n]
                gn = g + t * step[n:]
                vn = dual(fn, gn, eps, plan_of(fn, gn, eps))
                if math.isfinite(vn) and vn >= val - 1e-18:
                    break
                t *= 0.5
            else:
                break
            f, g = fn, gn
            total += 1
    return plan_of(f, g, eps), f, g, total, eps, gnorm


def hk_distance_squared(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                        eps_schedule=DEFAULT_EPS_SCHEDULE,
                        max_iter: int = 60, tol: float = 1e-11,
                        warm_start=None) -> HKResult:
    """Squared Hellinger-Kantorovich distance between two grid measures."""
    if not mu0.same_domain(mu1):
        raise ValueError("measures live on different grids")
    dom = mu0.domain
    w = dom.weights
    a_full = mu0.density * w
    b_full = mu1.density * w
    m0, m1 = float(a_full.sum()), float(b_full.sum())

    n = dom.n_nodes
    zeros = np.zeros(n)
    if m0 == 0.0 and m1 == 0.0:
        return HKResult(0.0, np.zeros((n, n)), zeros, zeros, 0.0, 0, True,
                        dual_value=0.0, target_slope=np.ones(n))
    cost_full = _domain_cost(dom)
    if m0 == 0.0 or m1 == 0.0:
        return HKResult(m0 + m1, np.zeros((n, n)), zeros, zeros, 0.0, 0,
                        True, dual_value=m0 + m1, target_slope=np.ones(n))

    src = np.where(a_full > 0)[0]
    tgt = np.where(b_full > 0)[0]
    a = a_full[src]
    b = b_full[tgt]
    cost = cost_full[np.ix_(src, tgt)]
    reachable_src = np.isfinite(cost).any(axis=1)
    reachable_tgt = np.isfinite(cost).any(axis=0)
    base = float(a[~reachable_src].sum() + b[~reachable_tgt].sum())
    a_r, b_r = a[reachable_src], b[reachable_tgt]
    plan_r = np.zeros((a_r.size, b_r.size))
    f_r = np.zeros(a_r.size)
    g_r = np.zeros(b_r.size)
    iters, eps, gnorm = 0, float(eps_schedule[-1]), 0.0
    cost_r = cost[np.ix_(reachable_src, reachable_tgt)]
    if a_r.size and b_r.size:
        f0 = g0 = None
        sched = eps_schedule
        if warm_start is not None:
            f0 = warm_start[0][src][reachable_src]
            g0 = warm_start[1][tgt][reachable_tgt]
            sched = eps_schedule[-1:]
        plan_r, f_r, g_r, iters, eps, gnorm = _dual_newton(
            a_r, b_r, cost_r, sched, max_iter, tol * max(1.0, m0 + m1),
            f0, g0)
        if warm_start is not None and gnorm > 1e6 * tol * max(1.0, m0 + m1):
            # stale warm start; redo the full continuation from scratch
            plan_r, f_r, g_r, it2, eps, gnorm = _dual_newton(
                a_r, b_r, cost_r, eps_schedule, max_iter,
                tol * max(1.0, m0 + m1))
            iters += it2

    plan = np.zeros((n, n))
    plan[np.ix_(src[reachable_src], tgt[reachable_tgt])] = plan_r
    f_full = np.zeros(n)
    g_full = np.zeros(n)
    f_full[src[reachable_src]] = f_r
    g_full[tgt[reachable_tgt]] = g_r

    if a_r.size and b_r.size:
        value = base + let_cost(plan_r, a_r, b_r, cost_r)
        dual = base + (float(a_r @ (1.0 - np.exp(-f_r))
                             + b_r @ (1.0 - np.exp(-g_r)))
                       - eps * (float(plan_r.sum())
                                - float(a_r.sum() * b_r.sum())))
    else:
        value = base + float(a_r.sum() + b_r.sum())
        dual = value

    # exact derivative of the regularized dual value with respect to each
    # target node mass; slope 1 where no transport partner exists
    slope = np.ones(n)
    if b_r.size:
        s_r = plan_r.sum(axis=0)
        slope_r = (1.0 - np.exp(-g_r)) - eps * (s_r / b_r - float(a_r.sum()))
        slope[tgt[reachable_tgt]] = slope_r
    converged = gnorm <= 1e3 * tol * max(1.0, m0 + m1)
    return HKResult(float(value), plan, f_full, g_full, float(gnorm), iters,
                    converged, eps, float(dual), slope)


def hk_distance(mu0: DiscreteMeasure, mu1: DiscreteMeasure, **kw) -> float:
    return hk_distance_squared(mu0, mu1, **kw).hk


def hk_exact_small(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                   kkt_tol: float = 1e-10, max_newton: int = 2000) -> HKResult:
    """Interior-point solve of the entropy-transport program, tiny supports.

    Minimizes the objective plus a vanishing log barrier on the coupling
    entries with damped Newton steps; the barrier weight is driven to
    1e-14 so the complementarity residual falls below the tolerance.
    """
    if not mu0.same_domain(mu1):
        raise ValueError("measures live on different grids")
    dom = mu0.domain
    w = dom.weights
    a_full = mu0.density * w
    b_full = mu1.density * w
    src = np.where(a_full > 0)[0]
    tgt = np.where(b_full > 0)[0]
    if src.size > 8 or tgt.size > 8:
        raise ValueError("exact solver limited to supports of eight nodes")
    if src.size == 0 or tgt.size == 0:
        return hk_distance_squared(mu0, mu1)
    a = a_full[src]
    b = b_full[tgt]
    cost = _domain_cost(dom)[np.ix_(src, tgt)]
    pairs = np.argwhere(np.isfinite(cost))
    base = float(a.sum() + b.sum())
    f_full = np.zeros(dom.n_nodes)
    g_full = np.zeros(dom.n_nodes)
    if pairs.shape[0] == 0:
        return HKResult(base, np.zeros((dom.n_nodes, dom.n_nodes)),
                        f_full, g_full, 0.0, 0, True)

    c = cost[pairs[:, 0], pairs[:, 1]]
    A = np.zeros((src.size, pairs.shape[0]))
    B = np.zeros((tgt.size, pairs.shape[0]))
    A[pairs[:, 0], np.arange(pairs.shape[0])] = 1.0
    B[pairs[:, 1], np.arange(pairs.shape[0])] = 1.0

    def value_grad_hess(h, barrier):
        r = A @ h
        s = B @ h
        val = (float(np.sum(xlogy(r, r / a) - r) + np.sum(xlogy(s, s / b) - s))
               + base + float(c @ h) - barrier * float(np.sum(np.log(h))))
        grad = (A.T @ np.log(r / a) + B.T @ np.log(s / b) + c - barrier / h)
        hess = (A.T * (1.0 / r) @ A + B.T * (1.0 / s) @ B
                + np.diag(barrier / h**2))
        return val, grad, hess

    h = np.outer(a, b)[pairs[:, 0], pairs[:, 1]] / max(base, 1.0) + 1e-3
    # follow the barrier central path: at weight b the complementarity
    # products grad_i * h_i equal b, so driving b below the tolerance
    # certifies the KKT system
    barrier = 1e-2
    it = 0
    while barrier > 0.005 * kkt_tol and it < max_newton:
        barrier = max(barrier * 0.2, 0.005 * kkt_tol)
        for _ in range(80):
            it += 1
            _, grad, hess = value_grad_hess(h, barrier)
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = grad / np.diag(hess)
            t = 1.0
            while np.any(h - t * step <= 0):
                t *= 0.5
            gnorm = float(np.linalg.norm(grad))
            g_new = grad
            while t > 1e-16:
                h_new = h - t * step
                g_new = value_grad_hess(h_new, barrier)[1]
                if float(np.linalg.norm(g_new)) <= (1.0 - 0.1 * t) * gnorm:
                    break
                t *= 0.5
            else:
                break
            h = h_new
            if float(np.linalg.norm(g_new * h)) < 0.1 * barrier:
                break

    r = A @ h
    s = B @ h
    grad = A.T @ np.log(r / a) + B.T @ np.log(s / b) + c
    kkt = float(np.max(np.abs(grad * h)))
    plan = np.zeros((dom.n_nodes, dom.n_nodes))
    plan[src[pairs[:, 0]], tgt[pairs[:, 1]]] = h
    f_full[src] = -np.log(r / a)
    g_full[tgt] = -np.log(s / b)
    dense = np.zeros_like(cost)
    dense[pairs[:, 0], pairs[:, 1]] = h
    value = let_cost(dense, a, b, cost)
    return HKResult(float(value), plan, f_full, g_full, kkt, it,
                    kkt < kkt_tol)


def hk_two_diracs(mass0: float, mass1: float, distance: float) -> float:
    """Closed-form squared distance between two weighted point masses."""
    if mass0 < 0 or mass1 < 0 or distance < 0:
        raise ValueError("masses and distance must be nonnegative")
    return mass0 + mass1 - 2.0 * math.sqrt(mass0 * mass1) * math.cos(
        min(distance, HALF_PI))


def scaling_identity_gap(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                         t0: float, t1: float, **kw) -> dict:
    """Residual of HK^2(t0^2 mu0, t1^2 mu1) against its dilation formula."""
    from .measures import scale_measure

    hk2 = hk_distance_squared(mu0, mu1, **kw).hk_squared
    lhs = hk_distance_squared(scale_measure(mu0, t0),
                              scale_measure(mu1, t1), **kw).hk_squared
    rhs = (t0 * t1 * hk2 + (t0 * t0 - t0 * t1) * mu0.mass
           + (t1 * t1 - t0 * t1) * mu1.mass)
    return {"lhs": lhs, "rhs": rhs, "gap": lhs - rhs, "hk_squared": hk2}


def mass_gap_lower_bound(mu0: DiscreteMeasure, mu1: DiscreteMeasure) -> float:
    """(sqrt m0 - sqrt m1)^2, always below the squared distance."""
    return (math.sqrt(mu0.mass) - math.sqrt(mu1.mass)) ** 2


# ---------------------------------------------------------------------------
# spherical variant


def shk_from_hk_squared(hk2: float) -> float:
    """Spherical distance 2 arcsin(HK / 2) from the squared distance."""
    hk = math.sqrt(max(hk2, 0.0))
    if hk > 2.0 + 1e-9:
        raise ValueError("squared distance exceeds 4; inputs not probabilities")
    return 2.0 * math.asin(min(hk / 2.0, 1.0))


def shk_distance(mu0: DiscreteMeasure, mu1: DiscreteMeasure,
                 mass_tol: float = 1e-8, **kw) -> float:
    """Spherical Hellinger-Kantorovich distance between unit-mass measures."""
    if abs(mu0.mass - 1.0) > mass_tol or abs(mu1.mass - 1.0) > mass_tol:
        raise ValueError("spherical distance requires unit total mass")
    return shk_from_hk_squared(hk_distance_squared(mu0, mu1, **kw).hk_squared)


def shk_squared_derivative(hk2: float) -> float:
    """d(SHK^2)/d(HK^2) evaluated at a squared distance value."""
    if hk2 <= 0:
        return 1.0
    hk = math.sqrt(min(hk2, 4.0))
    x = hk / 2.0
    if x >= 1.0:
        return math.inf
    return 2.0 * math.asin(x) / (hk * math.sqrt(1.0 - x * x))


# ---------------------------------------------------------------------------
# cone geometry over the base domain


def cone_distance(x0, r0, x1, r1, base_distance) -> float:
    """Distance on the metric cone: law of cosines with angles capped at pi."""
    if r0 < 0 or r1 < 0:
        raise ValueError("cone radii must be nonnegative")
    d = min(float(base_distance), math.pi)
    val = r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * math.cos(d)
    return math.sqrt(max(val, 0.0))


def cone_lift(mu: DiscreteMeasure) -> dict:
    """Plant the measure on the unit-radius level of the cone."""
    return {"base": mu, "radii": np.ones(mu.domain.n_nodes),
            "masses": mu.node_masses.copy()}


def cone_project(domain: GridDomain, radii: np.ndarray,
                 masses: np.ndarray) -> DiscreteMeasure:
    """Push a cone measure to the base, weighting by squared radius."""
    radii = np.asarray(radii, dtype=float)
    masses = np.asarray(masses, dtype=float)
    w = domain.weights
    density = np.zeros(domain.n_nodes)
    ok = w > 0
    density[ok] = (radii[ok] ** 2) * masses[ok] / w[ok]
    return DiscreteMeasure(domain, density)


def dilation_cost(mu0: DiscreteMeasure, dilation: np.ndarray,
                  target_positions: np.ndarray | None = None) -> float:
    """Transport-growth cost of moving mu0 by a dilation field.

    Each node carries factor q_i and lands at position index p_i; the cost
    integrates 1 + q^2 - 2 q cos(min(d, pi/2)) against mu0.
    """
    q = np.asarray(dilation, dtype=float)
    if np.any(q < 0):
        raise ValueError("dilation factors must be nonnegative")
    masses = mu0.node_masses
    if target_positions is None:
        d = np.zeros(mu0.domain.n_nodes)
    else:
        d = mu0.domain.distance_matrix()[
            np.arange(mu0.domain.n_nodes), np.asarray(target_positions)]
    return float(np.sum(masses * (1.0 + q * q
                                  - 2.0 * q * np.cos(np.minimum(d, HALF_PI)))))
