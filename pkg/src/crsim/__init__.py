"""Similarity tests for two competing-risks models with constant intensities.

The main entry points are :func:`run_similarity_test` (one threshold),
:func:`min_epsilon` (smallest rejecting threshold on a grid) and
:func:`run_scenario` (Monte Carlo rejection rates).
"""

from .inference import (INTENSITIES, PROBABILITIES, ConstrainedFit, ConstrainedFitError,
                        FittedPair, constrained_fit, fit_pair, log_likelihood,
                        mle_censoring_rate, mle_intensities)
from .io import parse_cohorts, write_cohorts
from .model import (Administrative, CensoringSpec, Exponential, ModelParams, intensity_distance,
                    sup_distance, transition_probability)
from .scan import ScanResult, min_epsilon
from .simulate import Cohort, RngStream, draw_cohort, draw_pathway
from .study import Scenario, StudyResult, builtin_scenarios, run_scenario
from .testkit import TestConfig, TestReport, run_similarity_test

__version__ = "0.1.0"

__all__ = [
    "Administrative", "CensoringSpec", "Cohort", "ConstrainedFit", "ConstrainedFitError",
    "Exponential", "FittedPair", "INTENSITIES", "ModelParams", "PROBABILITIES", "RngStream",
    "ScanResult", "Scenario", "StudyResult", "TestConfig", "TestReport", "builtin_scenarios",
    "constrained_fit", "draw_cohort", "draw_pathway", "fit_pair", "intensity_distance",
    "log_likelihood", "min_epsilon", "mle_censoring_rate", "mle_intensities", "parse_cohorts",
    "run_scenario", "run_similarity_test", "sup_distance", "transition_probability",
    "write_cohorts",
]
