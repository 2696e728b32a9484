"""Latency arbitrage between two exchanges.

Closed-form outcome probabilities and optimal send delays for a split
order, plus a discrete-event Monte Carlo engine that checks each closed
form by brute force.
"""

from .analytics import (CostProfile, OutcomeProbabilities, choose_execution_time,
                        derivative_signs_at_optimum, expected_cost, foc_residual,
                        optimal_delay_closed_form, optimal_delay_numeric, outcome_probs,
                        outcome_probs_gaussian, outcome_probs_timed, sim_bound_timed)
from .engine import (Delayed, Immediate, SimConfig, SimReport, TimedExecution, classify,
                     run_monte_carlo, run_trial)
from .latency import EmpiricalLatency, GaussianLatency, LatencyPair, load_latency_csv
from .market import (ExpenditureTriple, LinearMarketPair, expenditures, expenditures_general,
                     solve_equilibrium, split_order)

__version__ = "0.1.0"
