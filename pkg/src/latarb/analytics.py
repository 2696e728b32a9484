"""Outcome probabilities and the choice of send delay or execution time.

Conventions: ``delta`` delays the S-order relative to the L-order (negative
values delay L).  The latency gap is x = l_S + delta - l_L.  The trade is
revealed on L when x > H and on S when x < -H; otherwise both legs execute
simultaneously.

Gaussian closed forms use the untruncated normal.  Every probability here is
computed exactly for empirical legs too (by enumeration over the samples),
so the only approximations are quadrature and floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidRatio, UnreachableTarget, WrongDistributionKind
from .latency import (EmpiricalLatency, GaussianLatency, LatencyModel, LatencyPair, norm_cdf,
                      norm_logcdf, norm_pdf)
from .market import ExpenditureTriple

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class DelayAnalytics:
    gamma: float  # E[l_S - l_L] including delta
    alpha: float  # 1 / Var(l_S - l_L)
    delta: float

    @classmethod
    def from_pair(cls, pair: LatencyPair, delta: float = 0.0) -> "DelayAnalytics":
        s, l = pair.dist_s, pair.dist_l
        var = s.std ** 2 + l.std ** 2
        return cls(gamma=s.mean - l.mean + delta, alpha=1.0 / var, delta=delta)


@dataclass(frozen=True)
class OutcomeProbabilities:
    pi_sim: float
    pi_l: float
    pi_s: float

    def __post_init__(self):
        for name in ("pi_sim", "pi_l", "pi_s"):
            p = getattr(self, name)
            if not -1e-12 <= p <= 1 + 1e-12:
                raise ValueError(f"{name}={p} is not a probability")
        if abs(self.pi_sim + self.pi_l + self.pi_s - 1) > 1e-12:
            raise ValueError("outcome probabilities must sum to one")

    @classmethod
    def from_tails(cls, pi_l: float, pi_s: float) -> "OutcomeProbabilities":
        pi_l = min(max(float(pi_l), 0.0), 1.0)
        pi_s = min(max(float(pi_s), 0.0), 1.0 - pi_l)
        return cls(pi_sim=1.0 - pi_l - pi_s, pi_l=pi_l, pi_s=pi_s)

    def as_dict(self) -> dict:
        return {"pi_s": self.pi_s, "pi_l": self.pi_l, "pi_sim": self.pi_sim}


@dataclass(frozen=True)
class CostProfile:
    e_sim: float
    e_l: float
    e_s: float

    @property
    def excess_l(self) -> float:
        return self.e_l - self.e_sim

    @property
    def excess_s(self) -> float:
        return self.e_s - self.e_sim

    @property
    def ratio(self) -> float:
        if self.excess_l <= 0 or self.excess_s <= 0:
            raise InvalidRatio("costs need E_L > E_sim and E_S > E_sim")
        return self.excess_s / self.excess_l

    @classmethod
    def from_triple(cls, triple: ExpenditureTriple) -> "CostProfile":
        return cls(triple.e_sim, triple.e_l, triple.e_s)

    @classmethod
    def from_ratio(cls, ratio: float, excess_l: float = 1.0) -> "CostProfile":
        """Incremental costs (E_sim = 0) with the given excess-cost ratio."""
        return cls(0.0, excess_l, excess_l * ratio)


def _require_gaussian(pair: LatencyPair):
    if not pair.gaussian:
        raise WrongDistributionKind(
            "closed forms need Gaussian legs; use Monte Carlo (simulate) for empirical latencies")


def prob_gap_above(dist_s: LatencyModel, dist_l: LatencyModel, delta: float,
                   threshold: float) -> float:
    """P(l_S + delta - l_L > threshold) for independent legs."""
    shift = threshold - delta  # event: l_S - l_L > shift
    if isinstance(dist_s, GaussianLatency) and isinstance(dist_l, GaussianLatency):
        scale = math.hypot(dist_s.sigma, dist_l.sigma)
        return float(norm_cdf((dist_s.mu - dist_l.mu - shift) / scale))
    if isinstance(dist_s, EmpiricalLatency):
        # average over S samples of P(l_L < s - shift)
        return float(np.mean(dist_l.cdf_strict(dist_s.samples - shift)))
    # S Gaussian, L empirical: average over L samples of P(l_S > l + shift)
    return float(np.mean(dist_s.sf(dist_l.samples + shift)))


def prob_gap_below(dist_s: LatencyModel, dist_l: LatencyModel, delta: float,
                   threshold: float) -> float:
    """P(l_S + delta - l_L < -threshold)."""
    # l_S + delta - l_L < -thr  <=>  l_L - delta - l_S > thr
    return prob_gap_above(dist_l, dist_s, -delta, threshold)


def outcome_probs(pair: LatencyPair, delta: float = 0.0) -> OutcomeProbabilities:
    """Exact outcome probabilities for any combination of leg models."""
    if pair.gaussian:
        return outcome_probs_gaussian(pair, delta)
    return OutcomeProbabilities.from_tails(
        prob_gap_above(pair.dist_s, pair.dist_l, delta, pair.h),
        prob_gap_below(pair.dist_s, pair.dist_l, delta, pair.h),
    )


def _gaussian_args(pair: LatencyPair, delta: float):
    da = DelayAnalytics.from_pair(pair, delta)
    root = math.sqrt(da.alpha)
    return root * (-da.gamma + pair.h), root * (-da.gamma - pair.h)


def outcome_probs_gaussian(pair: LatencyPair, delta: float = 0.0) -> OutcomeProbabilities:
    _require_gaussian(pair)
    z_l, z_s = _gaussian_args(pair, delta)
    # 1 - Phi(z) evaluated as Phi(-z) keeps the tail accurate
    return OutcomeProbabilities.from_tails(norm_cdf(-z_l), norm_cdf(z_s))


def expected_cost(probs: OutcomeProbabilities, costs: CostProfile) -> float:
    return probs.pi_sim * costs.e_sim + probs.pi_l * costs.e_l + probs.pi_s * costs.e_s


def optimal_delay_closed_form(pair: LatencyPair, costs: CostProfile) -> float:
    _require_gaussian(pair)
    var = pair.dist_s.sigma ** 2 + pair.dist_l.sigma ** 2
    gamma_star = var / (2 * pair.h) * math.log(costs.ratio)
    return pair.dist_l.mu - pair.dist_s.mu + gamma_star


def gamma_at(pair: LatencyPair, delta: float) -> float:
    return DelayAnalytics.from_pair(pair, delta).gamma


def golden_section(fn, lo: float, hi: float, tol: float = 0.01) -> float:
    """Minimize a unimodal ``fn`` on [lo, hi]; returns the bracket midpoint."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (a + b) / 2


@dataclass(frozen=True)
class DelayOptimum:
    delta: float
    expected_cost: float
    interior: bool
    window: tuple[float, float]
    method: str = "grid_golden"


def _signed_log_excess(pair: LatencyPair, costs: CostProfile, delta):
    """Sortable key for expected cost at ``delta`` (Gaussian legs).

    Expected cost minus the constant E_sim + dE_L equals
    dE_S * pi_S - dE_L * (1 - pi_L).  Both terms are Gaussian tails, so the
    difference is carried as (sign, sign * log|value|), which orders the
    same way as the cost and never underflows.
    """
    z_l, z_s = _gaussian_args(pair, delta)
    a = math.log(costs.excess_s) + norm_logcdf(z_s)
    b = math.log(costs.excess_l) + norm_logcdf(z_l)
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    sign = np.sign(a - b)
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = hi + np.log1p(-np.exp(lo - hi))
    signed = np.where(sign == 0, 0.0, sign * mag)
    return sign, signed


def _excess(pair: LatencyPair, costs: CostProfile, delta: float) -> float:
    p = outcome_probs(pair, delta)
    return p.pi_l * costs.excess_l + p.pi_s * costs.excess_s


def _grid_argmin(pair, costs, grid) -> int:
    if pair.gaussian:
        sign, signed = _signed_log_excess(pair, costs, grid)
        return int(np.lexsort((signed, sign))[0])
    return int(np.argmin([_excess(pair, costs, float(d)) for d in grid]))


def _scalar_objective(pair, costs):
    if pair.gaussian:
        def key(delta):
            sign, signed = _signed_log_excess(pair, costs, delta)
            return (float(sign), float(signed))
        return key
    return lambda delta: _excess(pair, costs, delta)


MAX_BREAKPOINTS = 50_000


def _empirical_optimum(pair: LatencyPair, costs: CostProfile):
    """Exact minimizer when both legs are empirical.

    The cost is piecewise constant in delta with jumps where some sample gap
    l_L - l_S equals +-H.  At a jump the tied pairs count as simultaneous, so
    both the jump points and the open stretches between them are evaluated.
    """
    diffs = np.unique(np.subtract.outer(pair.dist_l.samples, pair.dist_s.samples))
    points = np.unique(np.concatenate([diffs + pair.h, diffs - pair.h]))
    if points.size > MAX_BREAKPOINTS:
        return None
    mids = (points[:-1] + points[1:]) / 2
    candidates = np.sort(np.concatenate([[points[0] - 1.0], points, mids, [points[-1] + 1.0]]))
    values = np.array([_excess(pair, costs, float(d)) for d in candidates])
    i = int(np.argmin(values))
    window = (float(candidates[0]), float(candidates[-1]))
    return float(candidates[i]), 0 < i < candidates.size - 1, window


def optimal_delay_numeric(pair: LatencyPair, costs: CostProfile, step: float = 1.0,
                          tol: float = 0.01, max_expansions: int = 30) -> DelayOptimum:
    """Cost-minimizing delay found without the closed form.

    Grid search (``step`` ms) over +-(mean_L + 6 sd_L), then golden-section
    refinement to ``tol``.  When the best grid point sits on the window edge
    the window is doubled and searched again; the result is flagged
    non-interior if that never settles.  Two empirical legs are solved
    exactly by enumerating the breakpoints of the step-shaped cost.
    """
    costs.ratio  # validates the excess costs
    if isinstance(pair.dist_s, EmpiricalLatency) and isinstance(pair.dist_l, EmpiricalLatency):
        found = _empirical_optimum(pair, costs)
        if found is not None:
            delta, interior, window = found
            cost = expected_cost(outcome_probs(pair, delta), costs)
            return DelayOptimum(delta, cost, interior, window, method="breakpoints")

    half = pair.dist_l.mean + 6 * pair.dist_l.std
    interior = False
    for _ in range(max_expansions + 1):
        grid = np.arange(-half, half + step / 2, step)
        i = _grid_argmin(pair, costs, grid)
        if 0 < i < grid.size - 1:
            interior = True
            break
        half *= 2
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, grid.size - 1)])
    best = float(golden_section(_scalar_objective(pair, costs), lo, hi, tol=tol))
    cost = expected_cost(outcome_probs(pair, best), costs)
    return DelayOptimum(delta=best, expected_cost=cost, interior=interior, window=(-half, half))


def foc_residual(pair: LatencyPair, costs: CostProfile, delta: float,
                 normalize: bool = False) -> float:
    """phi(sqrt(a)(H - g)) * dE_L - phi(sqrt(a)(-g - H)) * dE_S at ``delta``."""
    _require_gaussian(pair)
    z_l, z_s = _gaussian_args(pair, delta)
    r = float(norm_pdf(z_l) * costs.excess_l - norm_pdf(z_s) * costs.excess_s)
    return r / costs.excess_s if normalize else r


@dataclass(frozen=True)
class ProbabilitySlopes:
    """Slopes of the outcome probabilities in delta, per ms.

    The true slopes are the reported ones times exp(log_scale).  The scale is
    0 unless the tails are too thin for a double, where it keeps the slopes
    comparable.
    """

    delta: float
    dpi_sim: float
    dpi_l: float
    dpi_s: float
    log_scale: float = 0.0

    def leans_to_large_venue(self) -> bool:
        """Optimum conditions: dpi_sim < 0, dpi_l > 0, dpi_s < 0, |dpi_l| > |dpi_s|."""
        return (self.dpi_sim < 0 and self.dpi_l > 0 and self.dpi_s < 0
                and abs(self.dpi_l) > abs(self.dpi_s))


SLOPE_RESCALE_BELOW = -600.0


def _log_tails(pair: LatencyPair, delta: float):
    """Logs of (pi_L, 1 - pi_L, pi_S, 1 - pi_S)."""
    if pair.gaussian:
        z_l, z_s = _gaussian_args(pair, delta)
        return tuple(float(norm_logcdf(z)) for z in (-z_l, z_l, z_s, -z_s))
    p = outcome_probs(pair, delta)
    with np.errstate(divide="ignore"):
        return tuple(float(np.log(v)) for v in (p.pi_l, 1 - p.pi_l, p.pi_s, 1 - p.pi_s))


def probability_slopes(pair: LatencyPair, delta: float, step: float = 0.01) -> ProbabilitySlopes:
    """Central finite differences of the outcome probabilities in delta.

    Each probability is differenced through whichever of p and 1 - p is
    smaller, working from log tails rescaled by a shared factor, and the
    pi_sim slope is -(dpi_l + dpi_s).  Differencing numbers next to 1 would
    lose every significant digit in the far tails.
    """
    up = _log_tails(pair, delta + step)
    here = _log_tails(pair, delta)
    down = _log_tails(pair, delta - step)
    small = [0 if here[0] <= here[1] else 1, 2 if here[2] <= here[3] else 3]
    scale = max(here[i] for i in small)
    if not scale < SLOPE_RESCALE_BELOW:
        scale = 0.0  # representable as is

    def slope(i):
        diff = (math.exp(up[i] - scale) - math.exp(down[i] - scale)) / (2 * step)
        return diff if i % 2 == 0 else -diff

    dpi_l, dpi_s = slope(small[0]), slope(small[1])
    return ProbabilitySlopes(delta=delta, dpi_sim=-(dpi_l + dpi_s), dpi_l=dpi_l, dpi_s=dpi_s,
                             log_scale=scale)


def derivative_signs_at_optimum(pair: LatencyPair, costs: CostProfile,
                                step: float = 0.01) -> ProbabilitySlopes:
    return probability_slopes(pair, optimal_delay_closed_form(pair, costs), step)


def sim_bound_product(pair: LatencyPair, t_exec: float) -> float:
    """P(l_S <= T + H) * P(l_L <= T + H): both orders reach their venue in time."""
    t = t_exec + pair.h
    return float(pair.dist_s.cdf(t) * pair.dist_l.cdf(t))


def sim_bound_timed(pair: LatencyPair, t_exec: float) -> float:
    """Bound on pi_sim for orders timed to execute at ``t_exec`` (sent together).

    prod + P(|l_S - l_L| <= H) * (1 - prod), with prod from
    :func:`sim_bound_product`.  Only the product term is a rigorous lower
    bound on the engine's pi_sim; the second term assumes the late orders
    still race exactly as untimed ones, which overstates it slightly.
    """
    if t_exec < 0:
        raise ValueError("t_exec must be nonnegative")
    prod = sim_bound_product(pair, t_exec)
    untimed = outcome_probs(pair, 0.0).pi_sim
    return min(prod + untimed * (1.0 - prod), 1.0)


def _timed_reveal(first: LatencyModel, second: LatencyModel, t_exec: float, h: float) -> float:
    """P(exec_first - exec_second > h) with exec = max(T, arrival).

    That event needs l_first > T + h and l_second < l_first - h, so it
    integrates P(l_second < s - h) over s > T + h.
    """
    cut = t_exec + h
    if isinstance(first, EmpiricalLatency):
        s = first.samples
        return float(np.sum(second.cdf_strict(s[s > cut] - h)) / s.size)
    if isinstance(second, EmpiricalLatency):
        return float(np.mean(first.sf(np.maximum(cut, second.samples + h))))
    value, _ = integrate.quad(lambda s: float(first.pdf(s) * second.cdf(s - h)), cut, np.inf,
                              epsabs=1e-13, epsrel=1e-11, limit=200)
    return value


def outcome_probs_timed(pair: LatencyPair, t_exec: float) -> OutcomeProbabilities:
    """Exact probabilities for timed orders without clock error.

    Both orders leave at t=0 and execute at max(T, arrival).
    """
    if t_exec < 0:
        raise ValueError("t_exec must be nonnegative")
    return OutcomeProbabilities.from_tails(
        _timed_reveal(pair.dist_s, pair.dist_l, t_exec, pair.h),
        _timed_reveal(pair.dist_l, pair.dist_s, t_exec, pair.h),
    )


def choose_execution_time(pair: LatencyPair, target: float, tol: float = 0.01) -> float:
    """Smallest T (to ``tol`` ms) whose timed-order bound reaches ``target``.

    For target 1 the latest possible arrival is returned, which needs both
    legs to have bounded support.
    """
    if not 0 < target <= 1:
        raise ValueError("target must lie in (0, 1]")
    if target == 1:
        if not pair.compact:
            raise UnreachableTarget("target 1 needs latencies with bounded support")
        return max(pair.dist_s.max_support(), pair.dist_l.max_support())
    if sim_bound_timed(pair, 0.0) >= target:
        return 0.0
    hi = max(pair.dist_s.mean, pair.dist_l.mean, 1.0)
    while sim_bound_timed(pair, hi) < target:
        hi *= 2
        if hi > 1e9:
            raise UnreachableTarget(f"bound never reaches {target}")
    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if sim_bound_timed(pair, mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
