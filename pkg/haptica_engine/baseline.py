"""
PCA + k-nearest-neighbour comparator on vectorized feature windows.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.spatial.distance import cdist
from sklearn.decomposition import PCA

from haptica_codex.categories import Category
from haptica_codex.errors import InsufficientData, LengthMismatch, RankDeficient
from haptica_codex.features import CHANNELS, ON_DEGENERATE_CENTER, FeatureSeries, standardize


logger = structlog.get_logger()

DEFAULT_LENGTH = 120
DEFAULT_COMPONENTS = 3

# Relative to the largest variance.
_RANK_TOLERANCE = 1e-12

FORCE_CHANNELS = ("f_max",)
FORCE_AREA_CHANNELS = ("f_max", "area")
FORCE_MOTION_CHANNELS = ("f_max", "d")


@dataclass(frozen=True)
class PcaModel:
    """Mean and top principal directions (rows of components) of a vector set."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def transform(self, vectors) -> np.ndarray:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return (vectors - self.mean) @ self.components.T

    def inverse_transform(self, projected) -> np.ndarray:
        projected = np.atleast_2d(np.asarray(projected, dtype=float))
        return projected @ self.components + self.mean


def pca_fit(vectors, q: int = DEFAULT_COMPONENTS) -> PcaModel:
    """Fit the top-q principal directions of equal-length vectors.

    Each component is signed so that its largest-magnitude entry is positive.
    When the centred data has rank below q, q is reduced to the rank with a
    warning.

    Raises:
        InsufficientData: fewer than q + 1 vectors.
        RankDeficient: every vector is identical.
    """
    data = np.asarray(vectors, dtype=float)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D array of vectors, got shape {data.shape}")
    n, dim = data.shape
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q > dim:
        raise ValueError(f"q={q} exceeds the input dimension {dim}")
    if n < q + 1:
        raise InsufficientData(f"PCA with q={q} needs at least {q + 1} vectors, got {n}")

    pca = PCA(n_components=min(n, dim), svd_solver="full")
    pca.fit(data)
    variances = pca.explained_variance_
    if variances.size == 0 or variances[0] <= 0:
        raise RankDeficient("all vectors are identical; no principal direction exists")
    rank = int(np.count_nonzero(variances > variances[0] * _RANK_TOLERANCE))
    if rank < q:
        logger.warning("pca_rank_reduced", requested=q, rank=rank)
        q = rank

    components = pca.components_[:q].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(pca.mean_.copy(), components, variances[:q].copy())


def knn_classify(train, labels: Sequence[Category], query, k: int = 1) -> Category:
    """Majority label among the k nearest training vectors (Euclidean).

    Equal distances are ordered by label order then training index; vote ties go
    to the smallest mean distance, then the earliest label.
    """
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if len(train) == 0:
        raise ValueError("training set is empty")
    if len(labels) != len(train):
        raise ValueError(f"{len(labels)} labels for {len(train)} training vectors")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=float).reshape(1, -1)
    distances = cdist(query, train)[0]
    label_order = np.array([label.order for label in labels])
    ranking = np.lexsort((np.arange(len(train)), label_order, distances))[:k]

    votes: Dict[Category, list] = {}
    for index in ranking:
        votes.setdefault(labels[index], []).append(distances[index])
    return min(
        votes,
        key=lambda label: (-len(votes[label]), float(np.mean(votes[label])), label.order),
    )


def vectorize(
    features: FeatureSeries,
    channels: Sequence[str] = FORCE_CHANNELS,
    scale: bool = False,
    length: int = DEFAULT_LENGTH,
    on_degenerate: str = ON_DEGENERATE_CENTER,
) -> np.ndarray:
    """Concatenate the selected channels in order, optionally standardized per channel."""
    if not channels:
        raise ValueError("at least one channel is required")
    if len(features) != length:
        raise LengthMismatch(f"feature window has {len(features)} samples, expected {length}")
    parts = []
    for name in channels:
        values = np.asarray(features.channel(name), dtype=float)
        parts.append(standardize(values, on_degenerate) if scale else values)
    return np.concatenate(parts)


@dataclass(frozen=True)
class BaselineConfig:
    """Channel selection and PCA/k-NN settings of one comparator pipeline."""

    channels: Tuple[str, ...] = FORCE_CHANNELS
    scale: bool = False
    components: int = DEFAULT_COMPONENTS
    neighbors: int = 1
    length: int = DEFAULT_LENGTH
    on_degenerate: str = ON_DEGENERATE_CENTER

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        unknown = [name for name in self.channels if name not in CHANNELS]
        if unknown or not self.channels:
            raise ValueError(f"channels must be drawn from {CHANNELS}, got {self.channels}")

    @property
    def name(self) -> str:
        return "baseline_" + "_".join(self.channels)


@dataclass(frozen=True)
class BaselineModel:
    """Projected training set ready for nearest-neighbour lookup."""

    config: BaselineConfig
    pca: PcaModel
    projected: np.ndarray
    labels: Tuple[Category, ...]

    def predict(self, features: FeatureSeries) -> Category:
        cfg = self.config
        vector = vectorize(features, cfg.channels, cfg.scale, cfg.length, cfg.on_degenerate)
        return knn_classify(self.projected, self.labels, self.pca.transform(vector)[0], cfg.neighbors)


def train_baseline(
    training: Sequence[FeatureSeries], config: Optional[BaselineConfig] = None
) -> BaselineModel:
    config = config or BaselineConfig()
    if any(series.label is None for series in training):
        raise ValueError("training series must be labelled")
    vectors = np.array(
        [
            vectorize(series, config.channels, config.scale, config.length, config.on_degenerate)
            for series in training
        ]
    )
    pca = pca_fit(vectors, config.components)
    logger.debug(
        "baseline_trained",
        name=config.name,
        vectors=len(vectors),
        components=pca.n_components,
    )
    return BaselineModel(
        config, pca, pca.transform(vectors), tuple(series.label for series in training)
    )
