"""Diagnosing distribution shift in tabular data and training robust models."""
from .data import DataError, DomainPair, Region, TabularDataset, load_csv, make_rng, parse_region, synth_shift, write_csv
from .diagnostics import ShiftDecomposition, accuracy_decomposition, disde, fit_shared_weights, relative_regret
from .dro import AmbiguitySpec, WorstCaseWeights, divergence, inner_worst_case, rescale_radius, train
from .learners import LearnerSpec, LinearModel, TrainConfig, evaluate, fit_gbt, fit_linear, fit_tree
from .regions import feature_shift_scores, identify_region, identify_region_light, simulate_collection

__all__ = [
    "DataError",
    "DomainPair",
    "Region",
    "TabularDataset",
    "load_csv",
    "make_rng",
    "parse_region",
    "synth_shift",
    "write_csv",
    "ShiftDecomposition",
    "accuracy_decomposition",
    "disde",
    "fit_shared_weights",
    "relative_regret",
    "AmbiguitySpec",
    "WorstCaseWeights",
    "divergence",
    "inner_worst_case",
    "rescale_radius",
    "train",
    "LearnerSpec",
    "LinearModel",
    "TrainConfig",
    "evaluate",
    "fit_gbt",
    "fit_linear",
    "fit_tree",
    "feature_shift_scores",
    "identify_region",
    "identify_region_light",
    "simulate_collection",
]

__version__ = "0.1.0"
