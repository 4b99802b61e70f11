"""
Shared fixtures and builders for the Haptica test suite.
"""

import numpy as np
import pytest

from haptica_codex.categories import Category, Condition
from haptica_codex.features import FeatureSeries
from haptica_codex.taxels import TaxelFrame, TaxelTrial


def single_taxel_trial(
    n_frames=120, force=1.0, row=5, col=5, label=Category.RF, arm_step=None, rows=24, cols=16
):
    """Trial with one loaded taxel in every frame, optionally with a moving arm."""
    grid = np.zeros((rows, cols))
    grid[row, col] = force
    frames = tuple(TaxelFrame(grid) for _ in range(n_frames))
    arm = None if arm_step is None else np.arange(n_frames) * arm_step
    return TaxelTrial(frames, 100.0, label, Condition(), 0.5, arm)


def constant_series(value, label, length=120, condition=None, noise=0.0, seed=0):
    """Feature series whose channels hover around one value per category."""
    rng = np.random.default_rng(seed)
    f_max = value + noise * rng.standard_normal(length)
    area = np.full(length, float(round(value)))
    d = np.abs(value * 0.01 * np.arange(length) + noise * rng.standard_normal(length))
    d[0] = 0.0
    return FeatureSeries(
        np.arange(length) / 100.0, np.abs(f_max), area, d, 0, label, condition
    )


@pytest.fixture
def separable_dataset():
    """Ten noisy series per category with distinct levels."""
    levels = {Category.RF: 2.0, Category.RM: 6.0, Category.SF: 10.0, Category.SM: 14.0}
    dataset = []
    for category, level in levels.items():
        for trial in range(10):
            seed = int(100 * level) + trial
            dataset.append(constant_series(level, category, length=40, noise=0.1, seed=seed))
    return dataset
