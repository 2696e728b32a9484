"""Discrete-event Monte Carlo of one split order racing an arbitrageur.

Each trial follows the same event sequence:

1. dispatch: each leg leaves at its send time (0 unless delayed);
2. arrival: send time plus a latency draw;
3. execution: immediately on arrival, or for timed orders at
   max(T + clock error, arrival); the exchange never publishes receipt
   before that;
4. the HFT, colocated at both venues, sees each execution instantly and its
   order reaches the other venue H later; it fills only if it lands strictly
   before the investor's other leg executes;
5. the trial is classified and charged E_sim, E_L or E_S.

Randomness is organised in fixed-size blocks of trials.  Block k draws from
``SeedSequence(master_seed, spawn_key=(k,))``, so trial i's latencies depend
only on (master_seed, i).  Run length and worker count have no effect, and
the same draws are shared across strategies (common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from .errors import ConfigError
from .latency import PHYSICAL, SAMPLING_MODES, LatencyPair
from .market import ExpenditureTriple

BLOCK_SIZE = 1 << 16

SIMULTANEOUS = 0
REVEALED_L = 1
REVEALED_S = 2
CLASS_NAMES = ("simultaneous", "revealed_l", "revealed_s")


@dataclass(frozen=True)
class Immediate:
    pass


@dataclass(frozen=True)
class Delayed:
    """Pair-level send delay: positive holds the S-order back, negative the L-order."""

    delta: float


@dataclass(frozen=True)
class TimedExecution:
    t_exec: float

    def __post_init__(self):
        if not self.t_exec >= 0:
            raise ConfigError(f"t_exec must be nonnegative, got {self.t_exec!r}")


OrderKind = Union[Immediate, Delayed, TimedExecution]


@dataclass(frozen=True)
class SimConfig:
    replications: int = 100_000
    master_seed: int = 0
    sampling_mode: str = PHYSICAL
    clock_jitter: float = 0.0
    hft_enabled: bool = True
    threads: int = 1

    def __post_init__(self):
        if isinstance(self.replications, bool) or int(self.replications) != self.replications \
                or self.replications < 1:
            raise ConfigError(f"replications must be a positive integer, got {self.replications!r}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(f"sampling_mode must be one of {SAMPLING_MODES}")
        if not (self.clock_jitter >= 0 and math.isfinite(self.clock_jitter)):
            raise ConfigError("clock_jitter must be a nonnegative number")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be nonnegative")


@dataclass(frozen=True)
class TrialOutcome:
    exec_s: float
    exec_l: float
    classification: str
    realized_cost: float
    send_s: float = 0.0
    send_l: float = 0.0
    arrival_s: float = 0.0
    arrival_l: float = 0.0


@dataclass(frozen=True)
class SimReport:
    replications: int
    count_sim: int
    count_l: int
    count_s: int
    mean_cost: float

    @property
    def freq_sim(self) -> float:
        return self.count_sim / self.replications

    @property
    def freq_l(self) -> float:
        return self.count_l / self.replications

    @property
    def freq_s(self) -> float:
        return self.count_s / self.replications

    def _se(self, p: float) -> float:
        return math.sqrt(p * (1 - p) / self.replications)

    @property
    def se_sim(self) -> float:
        return self._se(self.freq_sim)

    @property
    def se_l(self) -> float:
        return self._se(self.freq_l)

    @property
    def se_s(self) -> float:
        return self._se(self.freq_s)

    def as_dict(self) -> dict:
        return {
            "replications": self.replications,
            "counts": {"sim": self.count_sim, "l": self.count_l, "s": self.count_s},
            "freq_sim": self.freq_sim, "freq_l": self.freq_l, "freq_s": self.freq_s,
            "se_sim": self.se_sim, "se_l": self.se_l, "se_s": self.se_s,
            "mean_cost": self.mean_cost,
        }


@dataclass
class Trace:
    """Per-trial event record, columns as arrays in trial order."""

    send_s: np.ndarray
    send_l: np.ndarray
    arrival_s: np.ndarray
    arrival_l: np.ndarray
    exec_s: np.ndarray
    exec_l: np.ndarray
    classification: np.ndarray
    columns: tuple = field(default=("trial", "send_s", "send_l", "arrival_s", "arrival_l",
                                    "exec_s", "exec_l", "classification"), repr=False)

    def write_csv(self, path) -> None:
        numeric = [getattr(self, c) for c in self.columns[1:-1]]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for i in range(self.exec_s.size):
                values = ",".join(repr(float(col[i])) for col in numeric)
                fh.write(f"{i},{values},{CLASS_NAMES[self.classification[i]]}\n")


def classify(exec_s, exec_l, h):
    """Outcome code(s) from execution times; a gap of exactly ``h`` is simultaneous."""
    gap = np.asarray(exec_s, dtype=float) - np.asarray(exec_l, dtype=float)
    out = np.where(gap > h, REVEALED_L, np.where(-gap > h, REVEALED_S, SIMULTANEOUS))
    return int(out) if out.ndim == 0 else out


def classify_name(exec_s: float, exec_l: float, h: float) -> str:
    return CLASS_NAMES[classify(exec_s, exec_l, h)]


def _send_time(kind: OrderKind, leg: str) -> float:
    if isinstance(kind, Delayed):
        return max(kind.delta, 0.0) if leg == "s" else max(-kind.delta, 0.0)
    return 0.0


def _check_kinds(kind_s: OrderKind, kind_l: OrderKind):
    for kind in (kind_s, kind_l):
        if not isinstance(kind, (Immediate, Delayed, TimedExecution)):
            raise ConfigError(f"unknown order kind {kind!r}")
    if isinstance(kind_s, Delayed) and isinstance(kind_l, Delayed) and kind_s.delta != kind_l.delta:
        raise ConfigError("both delayed legs must carry the same delta")


def _block_generator(master_seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))


def _simulate_block(pair: LatencyPair, kind_s: OrderKind, kind_l: OrderKind,
                    config: SimConfig, block: int, n: int):
    rng = _block_generator(config.master_seed, block)
    # fixed draw order keeps latencies common across strategies and jitter
    lat_s = pair.dist_s.sample(rng, BLOCK_SIZE, mode=config.sampling_mode)[:n]
    lat_l = pair.dist_l.sample(rng, BLOCK_SIZE, mode=config.sampling_mode)[:n]
    jit = rng.uniform(-1.0, 1.0, size=(2, BLOCK_SIZE))[:, :n] * config.clock_jitter

    send_s = np.full(n, _send_time(kind_s, "s"))
    send_l = np.full(n, _send_time(kind_l, "l"))
    arrival_s = send_s + lat_s
    arrival_l = send_l + lat_l
    exec_s = arrival_s
    exec_l = arrival_l
    if isinstance(kind_s, TimedExecution):
        exec_s = np.maximum(kind_s.t_exec + jit[0], arrival_s)
    if isinstance(kind_l, TimedExecution):
        exec_l = np.maximum(kind_l.t_exec + jit[1], arrival_l)

    # HFT: lands on the other venue H after each execution, fills if strictly first
    hft_fills_s = exec_l + pair.h < exec_s
    hft_fills_l = exec_s + pair.h < exec_l
    codes = np.where(hft_fills_s, REVEALED_L, np.where(hft_fills_l, REVEALED_S, SIMULTANEOUS))
    return send_s, send_l, arrival_s, arrival_l, exec_s, exec_l, codes.astype(np.int8)


def _realized_cost(code: int, market: ExpenditureTriple, hft_enabled: bool) -> float:
    if not hft_enabled or code == SIMULTANEOUS:
        return market.e_sim
    return market.e_l if code == REVEALED_L else market.e_s


def run_trial(market: ExpenditureTriple, pair: LatencyPair, kind_s: OrderKind, kind_l: OrderKind,
              config: SimConfig, trial_index: int) -> TrialOutcome:
    """Replay a single trial of a Monte Carlo run.

    With the HFT disabled the timing classification is still reported but
    the investor always pays E_sim.
    """
    _check_kinds(kind_s, kind_l)
    if trial_index < 0:
        raise ValueError("trial_index must be nonnegative")
    block, offset = divmod(trial_index, BLOCK_SIZE)
    cols = _simulate_block(pair, kind_s, kind_l, config, block, offset + 1)
    send_s, send_l, arr_s, arr_l, exec_s, exec_l, codes = (c[offset] for c in cols)
    code = int(codes)
    return TrialOutcome(
        exec_s=float(exec_s), exec_l=float(exec_l), classification=CLASS_NAMES[code],
        realized_cost=_realized_cost(code, market, config.hft_enabled),
        send_s=float(send_s), send_l=float(send_l),
        arrival_s=float(arr_s), arrival_l=float(arr_l),
    )


def run_monte_carlo(market: ExpenditureTriple, pair: LatencyPair, kind_s: OrderKind,
                    kind_l: OrderKind, config: SimConfig, trace: bool = False):
    """Aggregate ``config.replications`` trials into a :class:`SimReport`.

    Returns ``(report, trace)`` when ``trace`` is true.
    """
    _check_kinds(kind_s, kind_l)
    n_total = int(config.replications)
    n_blocks = -(-n_total // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, n_total - k * BLOCK_SIZE) for k in range(n_blocks)]

    def work(block):
        cols = _simulate_block(pair, kind_s, kind_l, config, block, sizes[block])
        counts = np.bincount(cols[-1], minlength=3)
        return counts, (cols if trace else None)

    if config.threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, range(n_blocks)))
    else:
        results = [work(k) for k in range(n_blocks)]

    counts = np.sum([r[0] for r in results], axis=0)
    c_sim, c_l, c_s = (int(x) for x in counts)
    if config.hft_enabled:
        mean_cost = (c_sim * market.e_sim + c_l * market.e_l + c_s * market.e_s) / n_total
    else:
        mean_cost = market.e_sim
    report = SimReport(replications=n_total, count_sim=c_sim, count_l=c_l, count_s=c_s,
                       mean_cost=mean_cost)
    if not trace:
        return report
    stacked = [np.concatenate([r[1][j] for r in results]) for j in range(7)]
    return report, Trace(*stacked)


MIN_EXPECTED_COUNT = 10.0


def agrees_with(count: int, n: int, p: float, limit: float = 4.0) -> bool:
    """Is ``count`` successes out of ``n`` consistent with probability ``p``?

    |count/n - p| <= limit * sqrt(p(1-p)/n), the usual binomial standard-error
    check.  When n*p or n*(1-p) is under 10 the normal approximation behind
    it breaks down (one hit at p = 5e-8, n = 1e6 is already 4.4 SE), so those
    cases fall back to an exact two-sided binomial tail test at the same
    false-alarm level.
    """
    se = math.sqrt(p * (1 - p) / n)
    if abs(count / n - p) <= limit * se:
        return True
    if n * min(p, 1 - p) >= MIN_EXPECTED_COUNT:
        return False
    alpha = 2 * stats.norm.sf(limit)
    tail = min(stats.binom.cdf(count, n, p), stats.binom.sf(count - 1, n, p))
    return bool(2 * tail >= alpha)


def report_agrees(report: SimReport, pi_sim: float, pi_l: float, pi_s: float,
                  limit: float = 4.0) -> bool:
    n = report.replications
    return (agrees_with(report.count_sim, n, pi_sim, limit)
            and agrees_with(report.count_l, n, pi_l, limit)
            and agrees_with(report.count_s, n, pi_s, limit))


def strategy_legs(strategy: OrderKind) -> tuple[OrderKind, OrderKind]:
    """Both legs for a pair-level strategy."""
    return strategy, strategy
