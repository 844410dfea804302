"""Entropy densities E, the integral functional, and convexity certificates.

Two built-in families are provided:

* ``power_mass``:  E(c) = alpha * c**m + gamma * c  (alpha > 0, m > 1, gamma real),
  geodesically (2*gamma)-convex in the transport-growth metric;
* ``neg_power``:   E(c) = -beta * c**q  (beta >= 0, q in (0, 1)).

Custom tables interpolate (c, E(c)) samples with a monotone cubic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .measures import DiscreteMeasure


@dataclass(frozen=True)
class EntropySpec:
    """Convex density function with derivatives and recession slope."""

    e: Callable[[np.ndarray], np.ndarray]
    de: Callable[[np.ndarray], np.ndarray]
    d2e: Callable[[np.ndarray], np.ndarray]
    recession_slope: float  # lim E(t)/t, may be +inf
    convexity_modulus: float  # declared lambda of the generated functional
    c_low: Optional[float] = None  # witness with E'(c_low) < 0, if any
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, c):
        return self.e(np.asarray(c, dtype=float))

    def derivative(self, c):
        return self.de(np.asarray(c, dtype=float))

    def second_derivative(self, c):
        return self.d2e(np.asarray(c, dtype=float))

    def validate(self, c_grid: np.ndarray | None = None, tol: float = 1e-10) -> None:
        """Check convexity and E' monotonicity on a log-spaced grid."""
        if c_grid is None:
            c_grid = np.logspace(-3, 2, 64)
        vals = self(c_grid)
        # second differences on an uneven grid, normalized
        for i in range(1, len(c_grid) - 1):
            h0 = c_grid[i] - c_grid[i - 1]
            h1 = c_grid[i + 1] - c_grid[i]
            slope_l = (vals[i] - vals[i - 1]) / h0
            slope_r = (vals[i + 1] - vals[i]) / h1
            if slope_r - slope_l < -tol:
                raise ValueError(f"E is not convex near c={c_grid[i]:g}")
        dv = self.derivative(c_grid)
        if np.any(np.diff(dv) < -tol):
            raise ValueError("E' is not nondecreasing")
        if self.c_low is not None and not self.derivative(self.c_low) < 0:
            raise ValueError("declared c_low does not satisfy E'(c_low) < 0")


def zero_entropy() -> EntropySpec:
    z = lambda c: np.zeros_like(np.asarray(c, dtype=float))
    return EntropySpec(z, z, z, recession_slope=0.0, convexity_modulus=0.0,
                       family="zero")


def power_mass_entropy(alpha: float = 1.0, m: float = 2.0,
                       gamma: float = 0.0) -> EntropySpec:
    """E(c) = alpha c^m + gamma c; lambda = 2*gamma."""
    if alpha <= 0 or m <= 1:
        raise ValueError("power_mass requires alpha > 0 and m > 1")

    def e(c):
        return alpha * c**m + gamma * c

    def de(c):
        return alpha * m * c ** (m - 1) + gamma

    def d2e(c):
        return alpha * m * (m - 1) * c ** (m - 2)

    c_low = None
    if gamma < 0:
        # E'(c) < 0 for c below (-gamma / (alpha m))^(1/(m-1))
        c_low = 0.5 * (-gamma / (alpha * m)) ** (1.0 / (m - 1))
    return EntropySpec(e, de, d2e, recession_slope=math.inf,
                       convexity_modulus=2.0 * gamma, c_low=c_low,
                       family="power_mass",
                       params={"alpha": alpha, "m": m, "gamma": gamma})


def neg_power_entropy(q: float = 0.5, beta: float = 1.0) -> EntropySpec:
    """E(c) = -beta c^q with q in (0,1); E(0) = 0, E' < 0 everywhere."""
    if not 0 < q < 1 or beta < 0:
        raise ValueError("neg_power requires q in (0,1) and beta >= 0")

    def e(c):
        return -beta * np.power(c, q)

    def de(c):
        c = np.asarray(c, dtype=float)
        with np.errstate(divide="ignore"):
            return -beta * q * np.power(c, q - 1.0)

    def d2e(c):
        c = np.asarray(c, dtype=float)
        with np.errstate(divide="ignore"):
            return beta * q * (1.0 - q) * np.power(c, q - 2.0)

    return EntropySpec(e, de, d2e, recession_slope=0.0, convexity_modulus=0.0,
                       c_low=1.0 if beta > 0 else None, family="neg_power",
                       params={"q": q, "beta": beta})


def linear_entropy(gamma: float) -> EntropySpec:
    """E(c) = gamma c, the density of the mass functional gamma * mass."""
    def e(c):
        return gamma * np.asarray(c, dtype=float)

    def de(c):
        return np.full_like(np.asarray(c, dtype=float), gamma)

    z = lambda c: np.zeros_like(np.asarray(c, dtype=float))
    return EntropySpec(e, de, z, recession_slope=gamma,
                       convexity_modulus=0.0,
                       c_low=1.0 if gamma < 0 else None,
                       family="linear", params={"gamma": gamma})


def table_entropy(c_samples, e_samples, recession_slope: float,
                  convexity_modulus: float = 0.0) -> EntropySpec:
    """Monotone-cubic interpolation of (c, E(c)) samples."""
    interp = PchipInterpolator(np.asarray(c_samples, float),
                               np.asarray(e_samples, float))
    d1 = interp.derivative(1)
    d2 = interp.derivative(2)
    spec = EntropySpec(interp, d1, d2, recession_slope=recession_slope,
                       convexity_modulus=convexity_modulus,
                       family="custom_table")
    c_lo = find_c_low(spec, float(np.min(c_samples)), float(np.max(c_samples)))
    return EntropySpec(interp, d1, d2, recession_slope=recession_slope,
                       convexity_modulus=convexity_modulus, c_low=c_lo,
                       family="custom_table")


def entropy_from_json(text_or_dict) -> EntropySpec:
    d = json.loads(text_or_dict) if isinstance(text_or_dict, str) else text_or_dict
    family = d["family"]
    if family == "power_mass":
        return power_mass_entropy(d.get("alpha", 1.0), d.get("m", 2.0),
                                  d.get("gamma", 0.0))
    if family == "neg_power":
        return neg_power_entropy(d.get("q", 0.5), d.get("beta", 1.0))
    if family == "custom_table":
        return table_entropy(d["c"], d["E"], d["recession_slope"],
                             d.get("lambda", 0.0))
    if family == "linear":
        return linear_entropy(d.get("gamma", -1.0))
    if family == "zero":
        return zero_entropy()
    raise ValueError(f"unknown entropy family {family!r}")


def eval_functional(E: EntropySpec, mu: DiscreteMeasure,
                    singular_mass: float = 0.0) -> float:
    """Weighted sum of E(rho) plus the recession slope times singular mass."""
    if singular_mass < 0:
        raise ValueError("singular mass must be nonnegative")
    value = float(mu.domain.weights @ E(mu.density))
    if singular_mass > 0:
        if math.isinf(E.recession_slope):
            return math.inf
        value += E.recession_slope * singular_mass
    return value


def eval_limit_functional(gamma: float, mu: DiscreteMeasure,
                          tol: float = 1e-12) -> float:
    """gamma * mass if the density stays below 1, +inf otherwise."""
    if float(np.max(mu.density, initial=0.0)) > 1.0 + tol:
        return math.inf
    return gamma * mu.mass


def find_c_low(E: EntropySpec, c_min: float = 1e-6, c_max: float = 1e3,
               n: int = 64) -> Optional[float]:
    """Search a log grid for a point with E'(c) < 0."""
    c_min = max(c_min, 1e-12)
    grid = np.logspace(math.log10(c_min), math.log10(c_max), max(n, 64))
    dv = E.derivative(grid)
    neg = np.where(dv < 0)[0]
    if neg.size == 0:
        return None
    return float(grid[neg[-1]])


def check_NE_conditions(E: EntropySpec, lam: float, d: int,
                        rho_grid: np.ndarray | None = None,
                        gamma_grid: np.ndarray | None = None,
                        tol: float = 1e-8) -> dict:
    """Grid certificate for geodesic lambda-convexity in dimension d.

    Tests convexity of N(rho, g) = (rho/g)^d E(g^(2+d)/rho^d) - lam/2 g^2
    through finite-difference Hessian eigenvalues, and (for d >= 2)
    non-increase of N in rho through first differences.
    """
    if rho_grid is None:
        rho_grid = np.logspace(-1, 1, 40)
    if gamma_grid is None:
        gamma_grid = np.logspace(-1, 1, 40)

    def N(rho, g):
        return (rho / g) ** d * E(g ** (2 + d) / rho**d) - 0.5 * lam * g * g

    R, G = np.meshgrid(rho_grid, gamma_grid, indexing="ij")
    with np.errstate(over="raise"):
        try:
            vals = N(R, G)
            overflow = False
        except FloatingPointError:
            return {"convex": False, "monotone": False, "overflow": True,
                    "worst_hessian_eig": math.nan, "worst_monotone": math.nan}

    # finite-difference Hessian on the (log-spaced) grid, interior points
    worst_eig = math.inf
    for i in range(1, len(rho_grid) - 1):
        hr0 = rho_grid[i] - rho_grid[i - 1]
        hr1 = rho_grid[i + 1] - rho_grid[i]
        for j in range(1, len(gamma_grid) - 1):
            hg0 = gamma_grid[j] - gamma_grid[j - 1]
            hg1 = gamma_grid[j + 1] - gamma_grid[j]
            frr = 2 * (
                (vals[i + 1, j] - vals[i, j]) / hr1
                - (vals[i, j] - vals[i - 1, j]) / hr0
            ) / (hr0 + hr1)
            fgg = 2 * (
                (vals[i, j + 1] - vals[i, j]) / hg1
                - (vals[i, j] - vals[i, j - 1]) / hg0
            ) / (hg0 + hg1)
            frg = (
                vals[i + 1, j + 1] - vals[i + 1, j - 1]
                - vals[i - 1, j + 1] + vals[i - 1, j - 1]
            ) / ((hr0 + hr1) * (hg0 + hg1))
            # smaller eigenvalue of the symmetric 2x2 [[frr, frg], [frg, fgg]]
            mean = 0.5 * (frr + fgg)
            rad = math.hypot(0.5 * (frr - fgg), frg)
            worst_eig = min(worst_eig, mean - rad)
    convex = worst_eig >= -tol

    worst_mono = -math.inf
    monotone = True
    if d >= 2:
        diffs = np.diff((d - 1) * vals, axis=0)
        worst_mono = float(np.max(diffs))
        monotone = worst_mono <= tol
    return {"convex": bool(convex), "monotone": bool(monotone),
            "overflow": False, "worst_hessian_eig": float(worst_eig),
            "worst_monotone": float(worst_mono)}
