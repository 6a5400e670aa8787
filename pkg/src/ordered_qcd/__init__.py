"""Communication-efficient CUSUM change detection over decomposable graphical models."""

from .detector import (CusumState, DetectionOutcome, cusum_update, glr_statistic,
                       run_centralized)
from .graph import (NotDecomposable, PerfectSequence, UndirectedGraph, chain_graph,
                    check_decomposable, perfect_sequence, tree_graph, union_graph)
from .model import (CoefficientSet, GaussianScenario, SlotStatistics, build_coefficients,
                    build_cov_change_scenario, build_mean_shift_scenario, clique_llr,
                    clique_statistics, marginal, sample_observation)
from .montecarlo import (ExperimentConfig, SavingsReport, ScenarioSpec, calibrate_threshold,
                         savings_experiment, sweep)
from .ordering import SlotOutcome, k_star_oracle, run_ordered, run_slot, transmit_times

__version__ = "0.1.0"
