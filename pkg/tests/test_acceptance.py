"""Acceptance suite: one test per criterion at the stated tolerances.

A pass/fail line per criterion is printed in the terminal summary.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from latarb import analytics as an
from latarb.cli import calibrate_report, format_calibration, published_timed_arithmetic
from latarb.engine import (Delayed, Immediate, SimConfig, TimedExecution, report_agrees,
                           run_monte_carlo)
from latarb.latency import GaussianLatency, LatencyPair
from latarb.market import LinearMarketPair, expenditures, solve_equilibrium, split_order
from latarb.scenario import load_scenario

ALBANY = load_scenario("albany")
COSTS = ALBANY.costs
N = 10**6


def criterion(number, title):
    return pytest.mark.criterion(number, title)


def mc(pair, kind, n=N, seed=7, **kw):
    kw.setdefault("sampling_mode", "allow_negative")
    return run_monte_carlo(ALBANY.market, pair, kind, kind, SimConfig(n, seed, **kw))


def max_abs_z(report, probs):
    worst = 0.0
    for freq, p in ((report.freq_s, probs.pi_s), (report.freq_l, probs.pi_l),
                    (report.freq_sim, probs.pi_sim)):
        if freq == p:
            continue
        se = math.sqrt(p * (1 - p) / report.replications)
        worst = max(worst, abs(freq - p) / se if se > 0 else math.inf)
    return worst


def published_rounding(probs):
    """Two-decimal truncation of pi_S and pi_L, with pi_sim as the remainder."""
    s = math.floor(probs.pi_s * 100) / 100
    l = math.floor(probs.pi_l * 100) / 100
    return round(s, 2), round(l, 2), round(1 - s - l, 2)


@criterion(1, "no-delay profile (0.89, 0.07, 0.04); MC within 4 SE; < 30 s")
def test_criterion_01_immediate_profile():
    start = time.perf_counter()
    p = an.outcome_probs_gaussian(ALBANY.pair, 0.0)
    got = (p.pi_s, p.pi_l, p.pi_sim)
    assert all(abs(g - t) < 0.01 for g, t in zip(got, (0.89, 0.07, 0.04))), got
    assert published_rounding(p) == (0.89, 0.07, 0.04)
    rep = mc(ALBANY.pair, Immediate())
    assert report_agrees(rep, p.pi_sim, p.pi_l, p.pi_s), max_abs_z(rep, p)
    assert time.perf_counter() - start < 30


@criterion(2, "optimal-delay profile: gamma* 84.8, (0.01, 0.98, 0.01), numeric and FOC")
def test_criterion_02_optimal_delay_profile():
    pair = ALBANY.pair
    d = an.optimal_delay_closed_form(pair, COSTS)
    assert abs(an.gamma_at(pair, d) - 84.8) <= 0.1
    p = an.outcome_probs_gaussian(pair, d)
    assert (round(p.pi_s, 2), round(p.pi_l, 2), round(p.pi_sim, 2)) == (0.01, 0.98, 0.01)
    assert abs(an.optimal_delay_numeric(pair, COSTS).delta - d) <= 0.1
    assert abs(an.foc_residual(pair, COSTS, d, normalize=True)) <= 1e-9


@criterion(3, "timed profile: bound 0.977 at T=150, MC freq_sim >= bound, 0.99 flagged")
def test_criterion_03_timed_profile():
    pair = ALBANY.pair
    bound = an.sim_bound_timed(pair, 150.0)
    assert abs(bound - 0.977) <= 0.002
    cal = calibrate_report(replications=N, seed=7)
    timed = next(r for r in cal["rows"] if r["profile"] == "timed")
    assert timed["extra"]["published_literal_arithmetic"] == published_timed_arithmetic()
    assert published_timed_arithmetic() >= 0.99
    assert not timed["consistent"] and "5.2" in format_calibration(cal)
    rep = mc(pair, TimedExecution(150.0))
    assert rep.freq_sim >= bound, (
        f"freq_sim {rep.freq_sim:.6f} < bound {bound:.6f} "
        f"({(bound - rep.freq_sim) / rep.se_sim:.1f} SE); exact pi_sim "
        f"{an.outcome_probs_timed(pair, 150.0).pi_sim:.6f}")


@criterion(4, "expenditure ordering and ratio b/d over 1000 linear markets")
def test_criterion_04_expenditure_suite():
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(1000):
        p0, x_s, x_l = rng.uniform(1, 500), rng.uniform(5, 1000), rng.uniform(5, 1000)
        d = rng.uniform(0.05, 2.0)
        b = d * rng.uniform(1.001, 10.0)
        mkt = LinearMarketPair(a=p0 + b * x_s, b=b, c=p0 + d * x_l, d=d, x_bar=x_s + x_l)
        eq = solve_equilibrium(mkt)
        x_tilde = rng.uniform(0.01, 0.9) * min(x_s, x_l)
        e = expenditures(mkt, eq, split_order(mkt, eq, x_tilde).p_star)
        if not (e.e_sim < e.e_l < e.e_s) or not math.isclose(e.ratio, b / d, rel_tol=1e-9):
            violations += 1
    assert violations == 0


@criterion(5, "slope signs at delta* over 200 random scenarios with ratio > 1")
def test_criterion_05_lean_conditions():
    rng = np.random.default_rng(5)
    bad = []
    for _ in range(200):
        mu_s, mu_l = rng.uniform(10, 500, 2)
        sd_s, sd_l = rng.uniform(1, 60, 2)
        h = rng.uniform(1, 20)
        ratio = rng.uniform(1.0, 5.0)
        if ratio == 1.0:
            continue
        pair = LatencyPair(GaussianLatency(mu_s, sd_s), GaussianLatency(mu_l, sd_l), h)
        slopes = an.derivative_signs_at_optimum(pair, an.CostProfile.from_ratio(ratio))
        if not slopes.leans_to_large_venue():
            bad.append(slopes)
    assert not bad


@criterion(6, "compact support: Kampala T=671 gives freq_sim 1; Knoxville 80; Gaussian limit")
def test_criterion_06_compact_support():
    kampala = load_scenario("kampala")
    t = an.choose_execution_time(kampala.pair, 1.0)
    assert t == 671.0
    rep = run_monte_carlo(kampala.market, kampala.pair, TimedExecution(t), TimedExecution(t),
                          SimConfig(N, 7, "physical"))
    assert rep.count_sim == N
    assert an.choose_execution_time(load_scenario("knoxville").pair, 1.0) == 80.0

    pair = ALBANY.pair
    t_top = max(d.mean + 8 * d.std for d in (pair.dist_s, pair.dist_l))
    grid = np.linspace(0.0, t_top, 30)
    freqs = [mc(pair, TimedExecution(t), n=10**5).freq_sim for t in grid]
    assert all(b >= a for a, b in zip(freqs, freqs[1:]))
    assert freqs[-1] > 0.999


@criterion(7, "2 BP / 1.25 BP impacts give expenditure ratio 1.6")
def test_criterion_07_cme_ratio():
    mkt = LinearMarketPair.from_impacts(2.0, 1.25)
    assert mkt.cost_ratio == 1.6
    eq = solve_equilibrium(mkt)
    e = expenditures(mkt, eq, split_order(mkt, eq, 1.0).p_star)
    assert e.ratio == pytest.approx(1.6, rel=1e-12)
    assert COSTS.ratio == pytest.approx(1.6, rel=1e-12)


@criterion(8, "20 Gaussian scenarios x 3 strategies: MC within 4 SE at N=1e6")
def test_criterion_08_oracle_equivalence():
    rng = np.random.default_rng(8)
    worst = []
    for k in range(20):
        mu_s, mu_l = rng.uniform(10, 300, 2)
        sd_s, sd_l = rng.uniform(1, 60, 2)
        h = rng.uniform(1, 20)
        pair = LatencyPair(GaussianLatency(mu_s, sd_s), GaussianLatency(mu_l, sd_l), h)
        costs = an.CostProfile.from_ratio(rng.uniform(1.01, 5.0))
        d = an.optimal_delay_closed_form(pair, costs)
        t = float(rng.uniform(0.5, 1.5) * max(mu_s, mu_l))
        cases = ((Immediate(), an.outcome_probs_gaussian(pair, 0.0)),
                 (Delayed(d), an.outcome_probs_gaussian(pair, d)),
                 (TimedExecution(t), an.outcome_probs_timed(pair, t)))
        for j, (kind, probs) in enumerate(cases):
            rep = mc(pair, kind, seed=1000 + 3 * k + j)
            if not report_agrees(rep, probs.pi_sim, probs.pi_l, probs.pi_s):
                worst.append((k, kind, max_abs_z(rep, probs)))
    assert not worst


@criterion(9, "simulate JSON byte-identical across --threads")
def test_criterion_09_determinism(tmp_path):
    blobs = []
    for threads in ("1", "3", "8"):
        out = tmp_path / f"t{threads}.json"
        subprocess.run([sys.executable, "-m", "latarb", "simulate", "albany", "--seed", "7",
                        "-n", str(N), "--threads", threads, "--json", str(out)],
                       check=True, capture_output=True)
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    assert json.loads(blobs[0])["result"]["replications"] == N


@criterion(10, "0.1 ms clock jitter moves Albany timed freq_sim by < 0.001")
def test_criterion_10_clock_jitter():
    base = mc(ALBANY.pair, TimedExecution(150.0))
    jittered = mc(ALBANY.pair, TimedExecution(150.0), clock_jitter=0.1)
    assert abs(base.freq_sim - jittered.freq_sim) < 0.001
