"""
HMM models package.

Exports the Gaussian HMM, its training routines and the classifier bank.
"""

from .gaussian_hmm import (
    COVARIANCE_DIAG,
    COVARIANCE_FULL,
    GaussianHmm,
    TrainConfig,
    baum_welch,
    floor_covariance,
    forward_loglik,
    init_left_right,
    left_right_transitions,
    train_left_right,
    viterbi,
)
from .bank import HmmBank, classify, observation_sequence, train_bank

__all__ = [
    # Models
    "GaussianHmm",
    "TrainConfig",
    "COVARIANCE_FULL",
    "COVARIANCE_DIAG",
    # Training and inference
    "init_left_right",
    "baum_welch",
    "train_left_right",
    "viterbi",
    "forward_loglik",
    "left_right_transitions",
    "floor_covariance",
    # Banks
    "HmmBank",
    "train_bank",
    "classify",
    "observation_sequence",
]
