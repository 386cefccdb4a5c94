"""Desk-scale Bayesian neural network lab."""

from ..labels import binarize_label
from .experiment import SeedRun, run_seed, run_toy
from .mlp import MlpArchitecture
from .objectives import ConstantKL, CyclicalKL, class_weighted_ce, kl_anneal_weight
from .posteriors import (
    POSTERIOR_KINDS,
    PosteriorSpec,
    PriorConfig,
    init_posterior,
    kl_mean_field,
    sample_weights,
)
from .predict import pool_ensemble, predict_mc
from .tasks import SHIFT_KINDS, LabelledPoints, SyntheticShiftTask, gen_task
from .training import TrainConfig, TrainedModel, TrainingDiverged, train

__all__ = [
    "binarize_label",
    "MlpArchitecture",
    "ConstantKL",
    "CyclicalKL",
    "class_weighted_ce",
    "kl_anneal_weight",
    "POSTERIOR_KINDS",
    "PosteriorSpec",
    "PriorConfig",
    "init_posterior",
    "kl_mean_field",
    "sample_weights",
    "pool_ensemble",
    "predict_mc",
    "SHIFT_KINDS",
    "LabelledPoints",
    "SyntheticShiftTask",
    "gen_task",
    "TrainConfig",
    "TrainedModel",
    "TrainingDiverged",
    "train",
    "SeedRun",
    "run_seed",
    "run_toy",
]
