"""Two-venue asset market and what a split buy order costs under each
execution outcome.

The small venue S and the large venue L each carry a continuous density of
offered shares.  In the linear model the inverse demand curves are

    P_S = a - b * X_S,    P_L = c - d * X_L,

so the share densities are the constants 1/b and 1/d, and the large venue
is the more liquid one when ``b > d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DominanceViolated, InadmissibleParameters, OrderTooLarge

QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 40


@dataclass(frozen=True)
class LinearMarketPair:
    a: float  # price intercept of S
    b: float  # price slope of S
    c: float  # price intercept of L
    d: float  # price slope of L
    x_bar: float  # total outstanding quantity

    def __post_init__(self):
        for name in ("a", "b", "c", "d", "x_bar"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InadmissibleParameters(f"{name} must be positive and finite, got {value!r}")

    @property
    def dominant(self) -> bool:
        """True when L offers strictly more shares per price unit than S."""
        return self.b > self.d

    @property
    def cost_ratio(self) -> float:
        return self.b / self.d

    @classmethod
    def from_impacts(cls, impact_s: float, impact_l: float, price: float = 100.0,
                     x_bar: float = 100.0) -> "LinearMarketPair":
        """Symmetric-intercept market whose slopes are the per-unit price impacts.

        ``impact_s`` and ``impact_l`` are the price moves (e.g. in basis points)
        caused by the same purchase on S and L; the slopes are proportional to
        them, which is all the expenditure ratio depends on.
        """
        a = price + impact_s * impact_l * x_bar / (impact_s + impact_l)
        return cls(a=a, b=impact_s, c=a, d=impact_l, x_bar=x_bar)


@dataclass(frozen=True)
class EquilibriumState:
    p0: float
    x_s: float
    x_l: float


@dataclass(frozen=True)
class SplitOrder:
    p_star: float
    x_l_buy: float
    x_s_buy: float


@dataclass(frozen=True)
class ExpenditureTriple:
    e_sim: float
    e_l: float
    e_s: float

    @property
    def ratio(self) -> float:
        """(E_S - E_sim) / (E_L - E_sim); nan for a zero-size trade."""
        denom = self.e_l - self.e_sim
        if denom == 0:
            return math.nan
        return (self.e_s - self.e_sim) / denom

    def ranked(self) -> bool:
        return self.e_sim < self.e_l < self.e_s


@dataclass(frozen=True)
class DemandDensity:
    density: Callable[[float], float]
    p_lo: float
    p_hi: float

    def __call__(self, p: float) -> float:
        if p < self.p_lo or p > self.p_hi:
            raise ValueError(f"price {p} outside density domain [{self.p_lo}, {self.p_hi}]")
        value = self.density(p)
        if value < 0:
            raise ValueError(f"negative density {value} at price {p}")
        return value

    @classmethod
    def constant(cls, value: float, p_lo: float = 0.0, p_hi: float = math.inf) -> "DemandDensity":
        return cls(lambda p: value, p_lo, p_hi)


def solve_equilibrium(pair: LinearMarketPair) -> EquilibriumState:
    a, b, c, d, x_bar = pair.a, pair.b, pair.c, pair.d, pair.x_bar
    x_s = (a + d * x_bar - c) / (b + d)
    x_l = (-a + b * x_bar + c) / (b + d)
    if x_s <= 0 or x_l <= 0:
        raise InadmissibleParameters(
            f"equilibrium holdings must be positive, got x_s={x_s:.6g}, x_l={x_l:.6g}")
    p0 = a - b * x_s
    if p0 <= 0:
        raise InadmissibleParameters(f"equilibrium price must be positive, got {p0:.6g}")
    return EquilibriumState(p0=p0, x_s=x_s, x_l=x_l)


def split_order(pair: LinearMarketPair, eq: EquilibriumState, x_tilde: float) -> SplitOrder:
    """Split a buy of ``x_tilde`` shares so both venues end at the same price."""
    if x_tilde < 0:
        raise ValueError("x_tilde must be nonnegative")
    dp = x_tilde / (1.0 / pair.b + 1.0 / pair.d)
    p_star = eq.p0 + dp
    # buying past the intercept would need negative holdings on that venue
    if p_star > min(pair.a, pair.c):
        raise OrderTooLarge(
            f"order of {x_tilde} shares moves price to {p_star:.6g}, beyond "
            f"curve intercept {min(pair.a, pair.c):.6g}")
    return SplitOrder(p_star=p_star, x_l_buy=dp / pair.d, x_s_buy=dp / pair.b)


def expenditures(pair: LinearMarketPair, eq: EquilibriumState, p_star: float) -> ExpenditureTriple:
    """Cost of buying up to ``p_star`` on both venues under the three outcomes.

    Venue-wise integrals of P * f(P) over [p0, p_star] are written as
    dp * (p0 + dp / 2) * density, which avoids cancelling p_star**2 - p0**2.
    """
    if p_star < eq.p0:
        raise ValueError("p_star must be at least the equilibrium price")
    dp = p_star - eq.p0
    mid = eq.p0 + dp / 2
    spend_s = dp * mid / pair.b
    spend_l = dp * mid / pair.d
    qty_s = dp / pair.b
    qty_l = dp / pair.d
    return ExpenditureTriple(
        e_sim=spend_l + spend_s,
        e_l=spend_l + p_star * qty_s,
        e_s=p_star * qty_l + spend_s,
    )


def adaptive_simpson(fn: Callable[[float], np.ndarray], lo: float, hi: float,
                     tol: float = QUAD_TOL, max_depth: int = QUAD_MAX_DEPTH) -> np.ndarray:
    """Adaptive Simpson quadrature of a (possibly vector-valued) integrand.

    Convergence is judged on the largest component with the usual
    |S2 - S1| <= 15 * tol rule plus Richardson correction.
    """
    def simpson(f_lo, f_mid, f_hi, width):
        return (f_lo + 4.0 * f_mid + f_hi) * width / 6.0

    def recurse(a, b, fa, fm, fb, whole, eps, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = fn(lm), fn(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if depth <= 0 or np.max(np.abs(delta)) <= 15 * eps:
            return left + right + delta / 15
        return (recurse(a, m, fa, flm, fm, left, eps / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, eps / 2, depth - 1))

    if hi == lo:
        return np.zeros_like(np.asarray(fn(lo), dtype=float))
    fa, fb = np.asarray(fn(lo), dtype=float), np.asarray(fn(hi), dtype=float)
    fm = np.asarray(fn((lo + hi) / 2), dtype=float)
    return recurse(lo, hi, fa, fm, fb, simpson(fa, fm, fb, hi - lo), tol, max_depth)


def expenditures_general(f_l: DemandDensity, f_s: DemandDensity, p0: float,
                         p_star: float) -> ExpenditureTriple:
    """Expenditure triple for arbitrary share densities on [p0, p_star]."""
    if p_star < p0:
        raise ValueError("p_star must be at least p0")

    def integrand(p):
        dl, ds = f_l(p), f_s(p)
        if not dl > ds:
            raise DominanceViolated(f"f_L({p:.6g}) = {dl:.6g} does not exceed f_S = {ds:.6g}")
        return np.array([dl, ds, p * dl, p * ds])

    qty_l, qty_s, spend_l, spend_s = adaptive_simpson(integrand, p0, p_star)
    return ExpenditureTriple(
        e_sim=spend_l + spend_s,
        e_l=spend_l + p_star * qty_s,
        e_s=p_star * qty_l + spend_s,
    )
