"""
Cross-validation, parameter sweeps and leave-one-condition-out evaluation.

Every (classifier, fold) pair is an independent cell. Cells run on a process
pool and results are assembled in submission order, so reports do not depend
on the worker count.
"""

from concurrent import futures
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import structlog

from haptica_codex.categories import CATEGORY_ORDER, Category, Condition, FeatureSet
from haptica_codex.errors import HapticaError, InsufficientData, NoContact
from haptica_codex.features import (
    ON_DEGENERATE_CENTER,
    FeatureSeries,
    detect_onset,
    extract_features,
)
from haptica_codex.models import HmmBank, TrainConfig, classify, train_bank
from haptica_codex.taxels import PoolFactor, TaxelTrial

from .baseline import (
    FORCE_AREA_CHANNELS,
    FORCE_CHANNELS,
    FORCE_MOTION_CHANNELS,
    BaselineConfig,
    train_baseline,
)


logger = structlog.get_logger()

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")

CLASSIFIER_HMM = "hmm"
CLASSIFIER_BASELINE = "baseline"


def run_cells(func: Callable[[ItemT], ResultT], items: Sequence[ItemT], jobs: int = 1) -> List[ResultT]:
    """Apply func to every item, in parallel when jobs > 1, preserving order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with futures.ProcessPoolExecutor(max_workers=min(jobs, len(items))) as executor:
        return list(executor.map(func, items))


# -- classifiers ----------------------------------------------------------------

@dataclass(frozen=True)
class HmmPredictor:
    bank: HmmBank
    feature_set: FeatureSet
    on_degenerate: str

    def predict(self, features: FeatureSeries) -> Category:
        category, _ = classify(self.bank, features, self.feature_set, self.on_degenerate)
        return category


@dataclass(frozen=True)
class ClassifierSpec:
    """A trainable classifier: an HMM bank on one feature set, or the PCA/k-NN baseline."""

    kind: str = CLASSIFIER_HMM
    feature_set: FeatureSet = FeatureSet.FORCE
    train: TrainConfig = field(default_factory=TrainConfig)
    baseline: Optional[BaselineConfig] = None
    on_degenerate: str = ON_DEGENERATE_CENTER

    def __post_init__(self):
        if self.kind not in (CLASSIFIER_HMM, CLASSIFIER_BASELINE):
            raise ValueError(f"unknown classifier kind '{self.kind}'")
        if self.kind == CLASSIFIER_BASELINE and self.baseline is None:
            object.__setattr__(self, "baseline", BaselineConfig())

    @classmethod
    def hmm(
        cls,
        feature_set: FeatureSet,
        train: Optional[TrainConfig] = None,
        on_degenerate: str = ON_DEGENERATE_CENTER,
    ) -> "ClassifierSpec":
        return cls(CLASSIFIER_HMM, feature_set, train or TrainConfig(), None, on_degenerate)

    @classmethod
    def pca_knn(cls, config: BaselineConfig) -> "ClassifierSpec":
        return cls(CLASSIFIER_BASELINE, baseline=config, on_degenerate=config.on_degenerate)

    @property
    def name(self) -> str:
        if self.kind == CLASSIFIER_BASELINE:
            return self.baseline.name
        return f"hmm_{self.feature_set.value.replace('+', '_')}"

    def fit(self, training: Sequence[FeatureSeries]):
        if self.kind == CLASSIFIER_BASELINE:
            return train_baseline(training, self.baseline)
        bank = train_bank(training, self.feature_set, self.train, on_degenerate=self.on_degenerate)
        return HmmPredictor(bank, self.feature_set, self.on_degenerate)


def baseline_classifiers(length: int, components: int, neighbors: int, stereotyped: bool):
    """One- and two-channel comparators: (force, area) for stereotyped motion, else (force, motion)."""
    two_channels = FORCE_AREA_CHANNELS if stereotyped else FORCE_MOTION_CHANNELS
    return [
        ClassifierSpec.pca_knn(
            BaselineConfig(FORCE_CHANNELS, False, components, neighbors, length)
        ),
        ClassifierSpec.pca_knn(
            BaselineConfig(two_channels, not stereotyped, components, neighbors, length)
        ),
    ]


# -- reports --------------------------------------------------------------------

def empty_confusion() -> np.ndarray:
    return np.zeros((len(CATEGORY_ORDER), len(CATEGORY_ORDER)), dtype=int)


@dataclass
class ExperimentReport:
    """Confusion matrix (rows true, columns predicted, RF/RM/SF/SM order) of one evaluation."""

    name: str
    confusion: np.ndarray = field(default_factory=empty_confusion)
    metadata: Dict[str, Any] = field(default_factory=dict)
    failed_cells: int = 0
    wall_time: float = 0.0

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def per_class_accuracy(self) -> Dict[Category, float]:
        counts = self.confusion.sum(axis=1)
        return {
            category: float(self.confusion[i, i] / counts[i]) if counts[i] else 0.0
            for i, category in enumerate(CATEGORY_ORDER)
        }

    def record(self, truth: Category, predicted: Category):
        self.confusion[truth.order, predicted.order] += 1

    def merge(self, other: "ExperimentReport"):
        self.confusion += other.confusion
        self.failed_cells += other.failed_cells

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form; wall time is kept out so reports are reproducible."""
        return {
            "name": self.name,
            "metadata": dict(self.metadata),
            "labels": [category.value for category in CATEGORY_ORDER],
            "confusion": self.confusion.tolist(),
            "total": self.total,
            "accuracy": float(self.accuracy),
            "per_class_accuracy": {
                category.value: value for category, value in self.per_class_accuracy().items()
            },
            "failed_cells": self.failed_cells,
        }


@dataclass
class SweepTable:
    """Rows of one parameter sweep, in sweep order."""

    name: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def add_row(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise ValueError(f"row is missing columns {sorted(missing)}")
        self.rows.append({column: values[column] for column in self.columns})

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "columns": list(self.columns), "rows": [dict(r) for r in self.rows]}


# -- folds and cells ------------------------------------------------------------

def stratified_folds(labels: Sequence[Category], folds: int, seed: int = 0) -> List[List[int]]:
    """Split indices into folds, shuffling each category with the seed and dealing round-robin.

    Raises:
        InsufficientData: a category has fewer trials than folds.
    """
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    rng = np.random.default_rng(seed)
    assignment: List[List[int]] = [[] for _ in range(folds)]
    for category in CATEGORY_ORDER:
        members = [index for index, label in enumerate(labels) if label is category]
        if not members:
            continue
        if len(members) < folds:
            raise InsufficientData(
                f"category {category.value} has {len(members)} trials, need at least {folds}"
            )
        for position, index in enumerate(rng.permutation(members)):
            assignment[position % folds].append(int(index))
    return [sorted(fold) for fold in assignment]


@dataclass(frozen=True)
class Cell:
    classifier: ClassifierSpec
    training: Tuple[FeatureSeries, ...]
    testing: Tuple[FeatureSeries, ...]
    tag: str = ""


@dataclass(frozen=True)
class CellOutcome:
    predictions: Tuple[Category, ...] = ()
    error: Optional[str] = None


def evaluate_cell(cell: Cell) -> CellOutcome:
    """Train on the cell's training series and label its test series."""
    try:
        model = cell.classifier.fit(cell.training)
        return CellOutcome(tuple(model.predict(series) for series in cell.testing))
    except HapticaError as e:
        return CellOutcome(error=f"{type(e).__name__}: {e}")


def _collect(report: ExperimentReport, cell: Cell, outcome: CellOutcome):
    if outcome.error is not None:
        logger.error(
            "cell_failed", report=report.name, classifier=cell.classifier.name, cell=cell.tag,
            error=outcome.error,
        )
        report.failed_cells += 1
        return
    for series, predicted in zip(cell.testing, outcome.predictions):
        report.record(series.label, predicted)


def _require_labels(dataset: Sequence[FeatureSeries]):
    if any(series.label is None for series in dataset):
        raise ValueError("every feature series must be labelled")


def fold_cells(
    dataset: Sequence[FeatureSeries], classifier: ClassifierSpec, folds: int, seed: int
) -> List[Cell]:
    _require_labels(dataset)
    partition = stratified_folds([series.label for series in dataset], folds, seed)
    cells = []
    for fold_index, held_out in enumerate(partition):
        held = set(held_out)
        training = tuple(s for i, s in enumerate(dataset) if i not in held)
        testing = tuple(dataset[i] for i in held_out)
        cells.append(Cell(classifier, training, testing, tag=f"fold {fold_index}"))
    return cells


# -- experiments ----------------------------------------------------------------

def cross_validate_many(
    dataset: Sequence[FeatureSeries],
    classifiers: Sequence[ClassifierSpec],
    folds: int = 5,
    seed: int = 0,
    jobs: int = 1,
    metadata: Optional[Sequence[Dict[str, Any]]] = None,
) -> List[ExperimentReport]:
    """Cross-validate several classifiers on one dataset with one shared fold partition."""
    per_classifier = [fold_cells(dataset, clf, folds, seed) for clf in classifiers]
    outcomes = run_cells(evaluate_cell, [c for cells in per_classifier for c in cells], jobs)

    reports = []
    position = 0
    for index, (classifier, cells) in enumerate(zip(classifiers, per_classifier)):
        report = ExperimentReport(classifier.name)
        report.metadata = {"classifier": classifier.name, "folds": folds, "seed": seed}
        if classifier.kind == CLASSIFIER_HMM:
            report.metadata["n_states"] = classifier.train.n_states
            report.metadata["feature_set"] = classifier.feature_set.value
        if metadata is not None:
            report.metadata.update(metadata[index])
        for cell in cells:
            _collect(report, cell, outcomes[position])
            position += 1
        logger.info(
            "cross_validation_done",
            classifier=classifier.name,
            accuracy=round(report.accuracy, 4),
            failed_cells=report.failed_cells,
        )
        reports.append(report)
    return reports


def cross_validate(
    dataset: Sequence[FeatureSeries],
    classifier: ClassifierSpec,
    folds: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> ExperimentReport:
    """Stratified k-fold cross-validation of one classifier.

    Raises:
        InsufficientData: a category has fewer trials than folds.
    """
    return cross_validate_many(dataset, [classifier], folds, seed, jobs)[0]


def _extract_job(job: Tuple[TaxelTrial, float, int, Optional[int]]) -> Optional[FeatureSeries]:
    trial, window, connectivity, onset = job
    try:
        return extract_features(trial, window, connectivity=connectivity, onset=onset)
    except NoContact:
        return None


def extract_dataset(
    trials: Sequence[TaxelTrial],
    window: float,
    connectivity: int = 4,
    jobs: int = 1,
    onsets: Optional[Sequence[Optional[int]]] = None,
) -> List[FeatureSeries]:
    """Features of every trial; trials without contact are skipped with a warning.

    ``onsets`` fixes where each window opens instead of detecting it per trial.
    """
    if onsets is None:
        onsets = [None] * len(trials)
    elif len(onsets) != len(trials):
        raise ValueError(f"{len(onsets)} onsets for {len(trials)} trials")
    results = run_cells(
        _extract_job,
        [(trial, window, connectivity, onset) for trial, onset in zip(trials, onsets)],
        jobs,
    )
    kept = []
    for index, series in enumerate(results):
        if series is None:
            logger.warning("trial_skipped_no_contact", index=index, label=str(trials[index].label))
            continue
        kept.append(series)
    return kept


def contact_onsets(trials: Sequence[TaxelTrial]) -> Tuple[List[TaxelTrial], List[int]]:
    """Trials with contact at full resolution and their onset frames."""
    kept, onsets = [], []
    for index, trial in enumerate(trials):
        try:
            onsets.append(detect_onset(trial))
        except NoContact:
            logger.warning("trial_skipped_no_contact", index=index, label=str(trial.label))
            continue
        kept.append(trial)
    return kept, onsets


def resolution_sweep(
    trials: Sequence[TaxelTrial],
    pool_factors: Sequence[PoolFactor],
    train: TrainConfig,
    folds: int = 5,
    seed: int = 0,
    window: float = 1.2,
    connectivity: int = 4,
    jobs: int = 1,
    on_degenerate: str = ON_DEGENERATE_CENTER,
) -> Tuple[SweepTable, List[ExperimentReport]]:
    """Force and area cross-validation accuracy per pooling factor.

    Every pooled trial keeps the contact onset of its full-resolution source,
    so all resolutions see the same window.
    """
    table = SweepTable(
        "resolution_sweep",
        ["pooling", "rows", "cols", "taxels", "resolution_per_cm2", "force_accuracy", "area_accuracy"],
    )
    reports = []
    trials, onsets = contact_onsets(trials)
    for factor in pool_factors:
        pooled = [trial.pool(factor) for trial in trials]
        frame = pooled[0].frames[0]
        dataset = extract_dataset(pooled, window, connectivity, jobs, onsets)
        meta = {"pooling": str(factor), "resolution_per_cm2": frame.resolution_per_cm2}
        force, area = cross_validate_many(
            dataset,
            [
                ClassifierSpec.hmm(FeatureSet.FORCE, train, on_degenerate),
                ClassifierSpec.hmm(FeatureSet.AREA, train, on_degenerate),
            ],
            folds,
            seed,
            jobs,
            metadata=[meta, meta],
        )
        force.name = f"force_pool_{factor}"
        area.name = f"area_pool_{factor}"
        table.add_row(
            pooling=str(factor),
            rows=frame.rows,
            cols=frame.cols,
            taxels=frame.rows * frame.cols,
            resolution_per_cm2=frame.resolution_per_cm2,
            force_accuracy=force.accuracy,
            area_accuracy=area.accuracy,
        )
        logger.info(
            "resolution_evaluated",
            pooling=str(factor),
            taxels=frame.rows * frame.cols,
            force_accuracy=round(force.accuracy, 4),
            area_accuracy=round(area.accuracy, 4),
        )
        reports.extend([force, area])
    return table, reports


def state_sweep(
    dataset: Sequence[FeatureSeries],
    n_states: Sequence[int],
    feature_set: FeatureSet,
    train: TrainConfig,
    folds: int = 5,
    seed: int = 0,
    jobs: int = 1,
    on_degenerate: str = ON_DEGENERATE_CENTER,
) -> Tuple[SweepTable, List[ExperimentReport]]:
    """Cross-validation accuracy per number of HMM states."""
    classifiers = [
        ClassifierSpec.hmm(feature_set, replace(train, n_states=n), on_degenerate) for n in n_states
    ]
    reports = cross_validate_many(dataset, classifiers, folds, seed, jobs)
    table = SweepTable("state_sweep", ["n_states", "feature_set", "accuracy"])
    for n, report in zip(n_states, reports):
        report.name = f"{report.name}_n{n}"
        table.add_row(n_states=n, feature_set=feature_set.value, accuracy=report.accuracy)
    return table, reports


def conditions_in(dataset: Sequence[FeatureSeries]) -> List[Condition]:
    """Distinct conditions in order of first appearance."""
    seen: List[Condition] = []
    for series in dataset:
        if series.condition is None:
            raise ValueError("every feature series needs a condition for leave-one-condition-out")
        if series.condition not in seen:
            seen.append(series.condition)
    return seen


def generalization(
    dataset: Sequence[FeatureSeries],
    classifiers: Sequence[ClassifierSpec],
    jobs: int = 1,
) -> Tuple[SweepTable, List[ExperimentReport]]:
    """Leave-one-condition-out: train on every other condition, test on the held-out one.

    Returns a table with one row per held-out condition plus a mean row, and one
    report per classifier whose confusion matrix aggregates every round.
    """
    _require_labels(dataset)
    conditions = conditions_in(dataset)
    if len(conditions) < 2:
        raise InsufficientData(f"need at least 2 conditions, found {len(conditions)}")

    cells = []
    for classifier in classifiers:
        for condition in conditions:
            training = tuple(s for s in dataset if s.condition != condition)
            testing = tuple(s for s in dataset if s.condition == condition)
            cells.append(Cell(classifier, training, testing, tag=str(condition)))
    outcomes = run_cells(evaluate_cell, cells, jobs)

    names = [classifier.name for classifier in classifiers]
    table = SweepTable("generalization", ["held_out", *names])
    rounds: Dict[Condition, Dict[str, float]] = {condition: {} for condition in conditions}
    reports = []
    position = 0
    for classifier in classifiers:
        total = ExperimentReport(classifier.name, metadata={"classifier": classifier.name})
        for condition in conditions:
            cell, outcome = cells[position], outcomes[position]
            position += 1
            held_out = ExperimentReport(classifier.name)
            _collect(held_out, cell, outcome)
            rounds[condition][classifier.name] = held_out.accuracy
            total.merge(held_out)
        total.metadata["rounds"] = len(conditions)
        reports.append(total)

    for condition in conditions:
        table.add_row(held_out=str(condition), **rounds[condition])
    table.add_row(
        held_out="mean",
        **{name: float(np.mean([rounds[c][name] for c in conditions])) for name in names},
    )
    for report in reports:
        logger.info(
            "generalization_done",
            classifier=report.name,
            mean_accuracy=round(table.rows[-1][report.name], 4),
            failed_cells=report.failed_cells,
        )
    return table, reports
