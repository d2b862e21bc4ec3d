"""Monte Carlo study of excess-risk concentration for least squares over sup-norm balls."""
from .dictionary import Fourier, Histogram, make_dictionary
from .erm import ModelConstraint, fit
from .harness import (ExperimentPlan, run_concentration, run_curves, scaling_study, verify_margin,
                      verify_representation, verify_second_order, verify_tail_lemma)
from .locproc import empirical_coefficients, estimate_expected_curves, local_sup_curve
from .numerics import TRSProblem, solve_trs
from .scenario import Scenario, preset, sample

__version__ = "0.1.0"

__all__ = [
    "ExperimentPlan", "Fourier", "Histogram", "ModelConstraint", "Scenario", "TRSProblem",
    "empirical_coefficients", "estimate_expected_curves", "fit", "local_sup_curve", "make_dictionary",
    "preset", "run_concentration", "run_curves", "sample", "scaling_study", "solve_trs", "verify_margin",
    "verify_representation", "verify_second_order", "verify_tail_lemma",
]
