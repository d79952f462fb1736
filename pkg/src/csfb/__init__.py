"""Compressive-sensing opportunistic feedback for MIMO broadcast scheduling.

Monte-Carlo simulator and analysis library for shared uplink feedback: random
beamforming SINR models, sparse feedback encoding over shared channels, LASSO
and max-correlation recovery with least-squares refinement, rate back-off,
user selection, and the matching closed-form throughput and Wishart results.
"""

from .channels import (DownlinkRealization, SinrTable, SystemParams,
                       compute_sinr, generate_downlink, sinr_ccdf,
                       sinr_ccdf_inverse, sinr_cdf, sinr_pdf)
from .feedback import (MATRIX_KINDS, FeedbackConfig, FeedbackMatrix,
                       Measurement, SparseFeedbackVector, ThresholdSet,
                       analog_value_second_moment, encode_analog,
                       encode_digital, generate_feedback_matrix,
                       multi_thresholds, required_channels,
                       sigma_for_feedback_snr, single_threshold, transmit)
from .recovery import (ConvergenceError, RecoveryConditions, RecoveryResult,
                       SingularSupportError, correlation_active_set,
                       cs_success_probability, decompose_real, default_alpha,
                       lasso_solve, ls_refine, maxcorr_support,
                       recovery_conditions)
from .throughput import (BackoffPolicy, ThroughputRecord,
                         analog_rate_analytic, digital_rate_analytic,
                         digital_selection_expectation,
                         effective_rate_analytic, event_b_probability,
                         extreme_value_beta, extreme_value_rate,
                         make_backoff_policy, optimal_backoff, qfunc,
                         select_and_score_analog, select_and_score_digital)
from .training import (BlockBudget, BudgetReport, TrainingEstimate,
                       block_diagonal_budget, channel_budget,
                       chip_sequence_matrix, lmmse_gain_estimate)
from .wishart import (DivergenceError, EcmReport, WishartSpec,
                      asymptotic_beta, closed_form_s1, closed_form_s2,
                      dedicated_ecm, ecm_report, mc_min_eig_expectation)
from .harness import (CSV_COLUMNS, ConfigError, ExperimentConfig, ResultRow,
                      SweepPoint, calibrate_c, emit_csv, emit_plot_data,
                      infeasible_reason, parse_csv, preset, run_experiment,
                      run_point, sweep_points)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
