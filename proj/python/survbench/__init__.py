"""Python bindings for the survbench C++ core."""

import json

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    FittedLearner,
    choose_cv_scheme,
    cox_gradient,
    cox_loss,
    kaplan_meier,
    load_dataset,
    method_ids,
    nelson_aalen,
    run_cli,
    simulate,
    stratified_folds,
    uno_cindex,
    write_dataset,
)
from . import _core

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "FittedLearner",
    "choose_cv_scheme",
    "cox_gradient",
    "cox_loss",
    "evaluate_fold",
    "fit_learner",
    "kaplan_meier",
    "load_dataset",
    "method_ids",
    "nelson_aalen",
    "run_cli",
    "simulate",
    "stratified_folds",
    "uno_cindex",
    "write_dataset",
]


def fit_learner(method, train, seed=1, **overrides):
    """Fit one of the benchmark learners (see method_ids()) on a Dataset."""
    return _core._fit_learner(method, train, seed, json.dumps(overrides))


def evaluate_fold(method, train, test, seed=1, **overrides):
    """Fit on train, score on test; returns a dict of metrics and selection counts."""
    return _core._evaluate_fold(method, train, test, seed, json.dumps(overrides))
