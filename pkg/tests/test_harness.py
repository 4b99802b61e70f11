import csv

import numpy as np
import pytest
import yaml
from conftest import constant_series

from haptica_codex.categories import CATEGORY_ORDER, Category, Condition, FeatureSet
from haptica_codex.config import ExperimentConfig
from haptica_codex.errors import InsufficientData
from haptica_codex.features import detect_onset, extract_features
from haptica_codex.models import TrainConfig
from haptica_engine.baseline import BaselineConfig
from haptica_engine.dataset import (
    DatasetSpec,
    TrialJob,
    generate_dataset,
    load_dataset,
    simulate_trial,
    trial_seed,
)
from haptica_engine.harness import (
    ClassifierSpec,
    ExperimentReport,
    SweepTable,
    contact_onsets,
    cross_validate,
    cross_validate_many,
    extract_dataset,
    generalization,
    resolution_sweep,
    state_sweep,
    stratified_folds,
)
from haptica_engine.runner import ExperimentRunner, load_report, render_report


SMALL = TrainConfig(n_states=3)


def _labels(per_category):
    return [category for category in CATEGORY_ORDER for _ in range(per_category)]


def test_folds_are_disjoint_and_cover_everything():
    labels = _labels(7)
    folds = stratified_folds(labels, 3, seed=1)
    flat = sorted(i for fold in folds for i in fold)
    assert flat == list(range(len(labels)))
    for fold in folds:
        counts = [sum(labels[i] is c for i in fold) for c in CATEGORY_ORDER]
        assert max(counts) - min(counts) <= 1
        assert min(counts) >= 2


def test_folds_depend_only_on_seed():
    labels = _labels(6)
    assert stratified_folds(labels, 3, seed=4) == stratified_folds(labels, 3, seed=4)
    assert stratified_folds(labels, 3, seed=4) != stratified_folds(labels, 3, seed=5)


def test_too_few_trials_for_the_folds():
    with pytest.raises(InsufficientData):
        stratified_folds(_labels(2), 3)
    with pytest.raises(ValueError):
        stratified_folds(_labels(5), 1)


def test_report_arithmetic():
    report = ExperimentReport("demo")
    report.record(Category.RF, Category.RF)
    report.record(Category.RF, Category.RM)
    report.record(Category.SM, Category.SM)
    assert report.total == 3
    assert report.accuracy == pytest.approx(2 / 3)
    per_class = report.per_class_accuracy()
    assert per_class[Category.RF] == 0.5
    assert per_class[Category.SM] == 1.0
    assert per_class[Category.SF] == 0.0

    data = report.to_dict()
    assert data["labels"] == ["RF", "RM", "SF", "SM"]
    assert data["confusion"][0] == [1, 1, 0, 0]
    assert "wall_time" not in data


def test_sweep_rows_need_every_column():
    table = SweepTable("t", ["a", "b"])
    table.add_row(a=1, b=2)
    with pytest.raises(ValueError):
        table.add_row(a=1)


def test_separable_levels_are_classified_perfectly(separable_dataset):
    report = cross_validate(separable_dataset, ClassifierSpec.hmm(FeatureSet.FORCE, SMALL), folds=5)
    assert report.failed_cells == 0
    assert report.total == len(separable_dataset)
    assert report.accuracy == 1.0
    assert list(report.confusion.sum(axis=1)) == [10, 10, 10, 10]
    assert report.metadata["n_states"] == 3


def test_reports_do_not_depend_on_worker_count(separable_dataset):
    classifiers = [
        ClassifierSpec.hmm(FeatureSet.FORCE, SMALL),
        ClassifierSpec.pca_knn(BaselineConfig(length=40)),
    ]
    serial = cross_validate_many(separable_dataset, classifiers, folds=4, seed=3, jobs=1)
    parallel = cross_validate_many(separable_dataset, classifiers, folds=4, seed=3, jobs=2)
    for a, b in zip(serial, parallel):
        assert a.to_dict() == b.to_dict()


def test_unrelated_labels_score_near_chance():
    labels = np.random.default_rng(8).permutation(_labels(10))
    dataset = [
        constant_series(5.0, label, length=40, noise=1.0, seed=index)
        for index, label in enumerate(labels)
    ]
    report = cross_validate(dataset, ClassifierSpec.pca_knn(BaselineConfig(length=40)), folds=2)
    assert report.accuracy < 0.6


def test_failed_cells_are_counted_not_raised(separable_dataset):
    # Two folds of a 2-per-category dataset leave one training series per category.
    dataset = [
        series
        for category in CATEGORY_ORDER
        for series in [s for s in separable_dataset if s.label is category][:2]
    ]
    report = cross_validate(dataset, ClassifierSpec.hmm(FeatureSet.FORCE, SMALL), folds=2)
    assert report.failed_cells == 2
    assert report.total == 0


def _conditioned_dataset():
    levels = {Category.RF: 2.0, Category.RM: 6.0, Category.SF: 10.0, Category.SM: 14.0}
    conditions = [Condition("low", "low"), Condition("high", "high")]
    dataset = []
    for cond_index, condition in enumerate(conditions):
        for category, level in levels.items():
            for trial in range(4):
                seed = 1000 * cond_index + int(level) * 10 + trial
                series = constant_series(level, category, 40, condition, noise=0.1, seed=seed)
                dataset.append(series)
    return dataset


def test_generalization_holds_out_each_condition():
    dataset = _conditioned_dataset()
    classifiers = [
        ClassifierSpec.hmm(FeatureSet.FORCE, SMALL),
        ClassifierSpec.pca_knn(BaselineConfig(length=40)),
    ]
    table, reports = generalization(dataset, classifiers)
    assert table.columns == ["held_out", "hmm_force", "baseline_f_max"]
    assert [row["held_out"] for row in table.rows] == ["low:low", "high:high", "mean"]
    for report in reports:
        assert report.total == len(dataset)
        assert report.metadata["rounds"] == 2
        assert report.accuracy == 1.0
    assert table.rows[-1]["hmm_force"] == 1.0


def test_generalization_needs_two_conditions():
    dataset = [s for s in _conditioned_dataset() if s.condition == Condition("low", "low")]
    with pytest.raises(InsufficientData):
        generalization(dataset, [ClassifierSpec.hmm(FeatureSet.FORCE, SMALL)])


def test_state_sweep_rows(separable_dataset):
    table, reports = state_sweep(separable_dataset, [2, 3], FeatureSet.FORCE, SMALL, folds=2)
    assert [row["n_states"] for row in table.rows] == [2, 3]
    assert [report.name for report in reports] == ["hmm_force_n2", "hmm_force_n3"]
    assert all(row["accuracy"] == 1.0 for row in table.rows)


@pytest.fixture(scope="module")
def small_trials(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    generate_dataset(DatasetSpec(trials_per_cell=4, duration=2.0), out, seed=2)
    return load_dataset(out)


def test_extract_dataset_keeps_order(small_trials):
    features = extract_dataset(small_trials, 1.2)
    assert [s.label for s in features] == [t.label for t in small_trials]
    assert all(len(s) == 120 for s in features)


def test_features_follow_the_arm(small_trials):
    moving = next(t for t in small_trials if t.label is Category.RM)
    series = extract_features(moving, 1.2)
    assert series.d[-1] > series.d[0]


def test_resolution_sweep_table(small_trials):
    table, reports = resolution_sweep(small_trials, [1, "full"], SMALL, folds=2)
    assert [row["pooling"] for row in table.rows] == ["1", "full"]
    assert table.rows[0]["taxels"] == 384
    assert table.rows[1]["taxels"] == 1
    assert table.rows[1]["resolution_per_cm2"] < table.rows[0]["resolution_per_cm2"]
    assert [r.name for r in reports] == [
        "force_pool_1", "area_pool_1", "force_pool_full", "area_pool_full"
    ]


def test_pooled_trials_keep_the_contact_onset():
    spec = DatasetSpec(trials_per_cell=1, duration=2.0)
    trial = simulate_trial(TrialJob(0, Category.RF, Condition(), trial_seed(7, 0), spec))
    native = detect_onset(trial)
    assert native > 0
    for factor in (2, 4, 8):
        pooled = trial.pool(factor)
        # Summed sensor noise stays below the pooled threshold until contact.
        assert pooled.stacked()[:native].max() <= pooled.contact_threshold
        assert abs(detect_onset(pooled) - native) <= 1

    kept, onsets = contact_onsets([trial])
    assert len(kept) == 1 and onsets == [native]
    for factor in (2, 4, 8, "full"):
        series = extract_dataset([trial.pool(factor)], 1.2, onsets=onsets)[0]
        assert series.onset_index == native
        assert len(series) == 120


def _runner_config(tmp_path, **overrides):
    settings = dict(
        kind="cv4", generate="stereotyped", trials_per_cell=4, folds=2, n_states=[3],
        output_dir=str(tmp_path), jobs=1, seed=11,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def test_runner_writes_every_output(tmp_path):
    result = ExperimentRunner(_runner_config(tmp_path)).run()
    assert [r.name for r in result.reports] == ["hmm_force", "hmm_area"]
    for name in (
        "config.yaml", "confusion.csv", "confusion_hmm_force.csv", "confusion_hmm_area.csv",
        "summary.csv", "report.yaml", "timing.yaml", "dataset/manifest.csv",
    ):
        assert (tmp_path / name).exists(), name

    with open(tmp_path / "confusion.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["true\\predicted", "RF", "RM", "SF", "SM"]
    force = result.reports[0]
    assert sum(int(v) for row in rows[1:] for v in row[1:]) == force.total
    assert force.total + 8 * force.failed_cells == 16

    timing = yaml.safe_load((tmp_path / "timing.yaml").read_text())
    assert set(timing) == {"dataset", "features", "evaluation", "total"}
    assert load_report(tmp_path)["kind"] == "cv4"


def test_runner_is_deterministic(tmp_path):
    ExperimentRunner(_runner_config(tmp_path / "a", kind="multivariate_cv")).run()
    ExperimentRunner(_runner_config(tmp_path / "b", kind="multivariate_cv", jobs=2)).run()
    for name in ("report.yaml", "summary.csv", "confusion.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_render_report_shows_percentages():
    report = ExperimentReport("hmm_force")
    for truth, predicted in [(Category.RF, Category.RF)] * 3 + [(Category.RM, Category.RF)]:
        report.record(truth, predicted)
    table = SweepTable("state_sweep", ["n_states", "feature_set", "accuracy"])
    table.add_row(n_states=5, feature_set="force", accuracy=0.8125)
    text = render_report(
        {"kind": "state_sweep", "table": table.to_dict(), "reports": [report.to_dict()]}
    )
    assert "hmm_force: accuracy 75.00%" in text
    assert "81.25" in text
    assert "per class: RF 100.00%, RM 0.00%" in text


# Trend checks on full-size synthetic datasets.


@pytest.fixture(scope="module")
def stereotyped_features(tmp_path_factory):
    out = tmp_path_factory.mktemp("stereotyped")
    generate_dataset(DatasetSpec.preset("stereotyped"), out, seed=0, jobs=4)
    return extract_dataset(load_dataset(out), 1.2, jobs=4)


@pytest.mark.slow
def test_stereotyped_cross_validation(stereotyped_features):
    force, motion = cross_validate_many(
        stereotyped_features,
        [
            ClassifierSpec.hmm(FeatureSet.FORCE, TrainConfig(n_states=10)),
            ClassifierSpec.hmm(FeatureSet.FORCE_MOTION, TrainConfig(n_states=10)),
        ],
        folds=5,
        jobs=4,
    )
    assert force.accuracy >= 0.60
    assert motion.accuracy >= 0.85


@pytest.mark.slow
def test_state_count_rises_then_falls(stereotyped_features):
    table, _ = state_sweep(
        stereotyped_features, [10, 20, 100], FeatureSet.FORCE, TrainConfig(), folds=5, jobs=4
    )
    accuracy = {row["n_states"]: row["accuracy"] for row in table.rows}
    assert accuracy[20] >= accuracy[10]
    assert accuracy[100] <= max(accuracy.values()) - 0.05


@pytest.mark.slow
def test_area_needs_resolution(tmp_path):
    generate_dataset(DatasetSpec.preset("stereotyped"), tmp_path, seed=1, jobs=4)
    trials = load_dataset(tmp_path)
    table, _ = resolution_sweep(trials, [1, "full"], TrainConfig(n_states=10), folds=5, jobs=4)
    assert table.rows[0]["area_accuracy"] >= table.rows[1]["area_accuracy"] + 0.20


@pytest.mark.slow
def test_multivariate_generalizes_across_conditions(tmp_path):
    generate_dataset(DatasetSpec.preset("conditions"), tmp_path, seed=3, jobs=4)
    features = extract_dataset(load_dataset(tmp_path), 1.2, jobs=4)
    length = len(features[0])
    classifiers = [
        ClassifierSpec.pca_knn(BaselineConfig(("f_max", "d"), True, length=length)),
        ClassifierSpec.hmm(FeatureSet.FORCE, TrainConfig(n_states=10)),
        ClassifierSpec.hmm(FeatureSet.FORCE_MOTION, TrainConfig(n_states=10)),
    ]
    table, _ = generalization(features, classifiers, jobs=4)
    mean = table.rows[-1]
    assert mean["hmm_force_motion"] >= mean["hmm_force"] + 0.15
    assert mean["hmm_force_motion"] >= mean["baseline_f_max_d"] + 0.15
    assert abs(mean["baseline_f_max_d"] - 0.25) <= 0.20

