"""
Per-category HMM banks and maximum-score classification.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..categories import CATEGORY_ORDER, Category, FeatureSet
from ..errors import InsufficientData
from ..features import ON_DEGENERATE_RAISE, FeatureSeries, standardize
from .gaussian_hmm import GaussianHmm, TrainConfig, train_left_right, viterbi


logger = structlog.get_logger()

BankKey = Tuple[Category, FeatureSet]

MODEL_SUFFIX = ".hmm"


def observation_sequence(
    features: FeatureSeries, feature_set: FeatureSet, on_degenerate: str = ON_DEGENERATE_RAISE
) -> np.ndarray:
    """Observations an HMM of the given feature set consumes, shape (T, D).

    Univariate sets use the raw channel; the force+motion set stacks the
    per-trial standardized F_max and displacement channels.
    """
    if feature_set is FeatureSet.FORCE:
        return np.asarray(features.f_max, dtype=float)[:, None]
    if feature_set is FeatureSet.AREA:
        return np.asarray(features.area, dtype=float)[:, None]
    return np.column_stack(
        [standardize(features.f_max, on_degenerate), standardize(features.d, on_degenerate)]
    )


def model_filename(category: Category, feature_set: FeatureSet) -> str:
    return f"{category.value}_{feature_set.value.replace('+', '_')}{MODEL_SUFFIX}"


@dataclass
class HmmBank:
    """Trained models keyed by (category, feature set)."""

    models: Dict[BankKey, GaussianHmm] = field(default_factory=dict)

    def add(self, category: Category, feature_set: FeatureSet, model: GaussianHmm):
        if model.dim != feature_set.dim:
            raise ValueError(
                f"{feature_set.value} models need dimension {feature_set.dim}, got {model.dim}"
            )
        self.models[(category, feature_set)] = model

    def feature_sets(self) -> List[FeatureSet]:
        return [fs for fs in FeatureSet if any(key[1] is fs for key in self.models)]

    def is_complete(self, feature_set: FeatureSet) -> bool:
        return all((category, feature_set) in self.models for category in CATEGORY_ORDER)

    def save(self, directory: Path):
        """Write one model file per (category, feature set)."""
        from ..formats import write_model

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for (category, feature_set), model in sorted(
            self.models.items(), key=lambda item: (item[0][1].value, item[0][0].order)
        ):
            write_model(directory / model_filename(category, feature_set), model)

    @classmethod
    def load(cls, directory: Path) -> "HmmBank":
        from ..formats import read_model

        directory = Path(directory)
        bank = cls()
        for feature_set in FeatureSet:
            for category in CATEGORY_ORDER:
                path = directory / model_filename(category, feature_set)
                if path.exists():
                    bank.add(category, feature_set, read_model(path))
        if not bank.models:
            raise InsufficientData(f"no model files found in {directory}")
        return bank


def train_bank(
    training: Sequence[FeatureSeries],
    feature_set: FeatureSet,
    cfg: Optional[TrainConfig] = None,
    bank: Optional[HmmBank] = None,
    on_degenerate: str = ON_DEGENERATE_RAISE,
) -> HmmBank:
    """Train one left-right model per category on labelled feature series."""
    cfg = cfg or TrainConfig()
    bank = bank if bank is not None else HmmBank()
    by_category: Mapping[Category, List[np.ndarray]] = {cat: [] for cat in CATEGORY_ORDER}
    for series in training:
        if series.label is None:
            raise ValueError("training series must be labelled")
        by_category[series.label].append(observation_sequence(series, feature_set, on_degenerate))

    for category in CATEGORY_ORDER:
        sequences = by_category[category]
        if len(sequences) < 2:
            raise InsufficientData(
                f"category {category.value} has {len(sequences)} training series, need 2"
            )
        model, trace = train_left_right(sequences, cfg)
        bank.add(category, feature_set, model)
        logger.debug(
            "category_model_trained",
            category=category.value,
            feature_set=feature_set.value,
            sequences=len(sequences),
            iterations=len(trace) - 1,
            log_likelihood=trace[-1],
        )
    return bank


def classify(
    bank: HmmBank,
    features: FeatureSeries,
    feature_set: FeatureSet,
    on_degenerate: str = ON_DEGENERATE_RAISE,
) -> Tuple[Category, Dict[Category, float]]:
    """Category whose model gives the highest Viterbi log-probability.

    Ties resolve to the earliest category in RF < RM < SF < SM order.
    """
    if not bank.is_complete(feature_set):
        raise InsufficientData(f"bank has no complete set of {feature_set.value} models")
    obs = observation_sequence(features, feature_set, on_degenerate)
    scores: Dict[Category, float] = {}
    best: Optional[Category] = None
    for category in CATEGORY_ORDER:
        _, score = viterbi(bank.models[(category, feature_set)], obs)
        scores[category] = score
        if best is None or score > scores[best]:
            best = category
    return best, scores
