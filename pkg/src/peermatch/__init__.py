"""Simulated learner agents with regression-guided study-partner matching.

The package covers the full pipeline: loading a multiple-choice corpus,
running persona-driven agents against a completion backend, labeling
collaboration gains, fitting a Gaussian-process (or neural) regressor on
those gains, and picking partners from Pareto fronts inside a seeded,
reproducible experiment harness.
"""

from .backends import CachingBackend, DecodeParams, HttpBackend, LiveConfig, MockBackend
from .corpus import Exercise, ExerciseBlock, group_by_domain, load_corpus, sample_subset
from .features import HashingEmbedder, build_dataset, pair_gain
from .gp import GpFitConfig, GpRegressor, KernelParams, fit_gp, predict
from .harness import VariantConfig, default_suite_configs, default_synthetic_corpus, run_suite, run_variant
from .nn import MlpConfig, MlpRegressor
from .pareto import ScoreVector, dominates, pareto_front, select_partner
from .personas import Learner, Persona, default_cohort, enumerate_personas, render_system_prompt
from .protocol import exchange_and_resolve, parse_choice, solve_exercise

__version__ = "0.1.0"

__all__ = [
    "CachingBackend", "DecodeParams", "HttpBackend", "LiveConfig", "MockBackend",
    "Exercise", "ExerciseBlock", "group_by_domain", "load_corpus", "sample_subset",
    "HashingEmbedder", "build_dataset", "pair_gain",
    "GpFitConfig", "GpRegressor", "KernelParams", "fit_gp", "predict",
    "VariantConfig", "default_suite_configs", "default_synthetic_corpus", "run_suite", "run_variant",
    "MlpConfig", "MlpRegressor",
    "ScoreVector", "dominates", "pareto_front", "select_partner",
    "Learner", "Persona", "default_cohort", "enumerate_personas", "render_system_prompt",
    "exchange_and_resolve", "parse_choice", "solve_exercise",
]
