"""Estimation and testing of the maximum of K unknown means under UCB sampling."""

from .errors import (BudgetError, ConfigError, DegenerateStatisticError, DomainError, InsufficientDataError,
                     MaxMeanError)
from .estimators import (EstimateReport, confidence_interval, estimate, ga_estimate, ga_variance, lsa_estimate,
                         lsa_index, lsa_variance, max_estimate, min_estimate_via_negation)
from .harness import (EstimatorSummary, Experiment, ReplicationSummary, TrialRow, convergence_slope,
                      pilot_reference, replicate, replicate_trial, sweep)
from .policy import BanditState, ExplorationRate, PolicyConfig, run, run_static, select_arm, step, ucb_index
from .riskmodel import FactorRegion, PortfolioSpec, build_risk_systems, default_portfolio
from .systems import RngStream, SystemSpec, sample, sample_many, stream_id, true_mean
from .testing import TestOutcome, bonferroni_fr_test, single_test, trial_metrics

__version__ = "0.1.0"
