"""
Haptica experiment runner: dataset, features, evaluation and report files.
"""

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog
import yaml

from haptica_codex.categories import CATEGORY_ORDER, FeatureSet
from haptica_codex.config import ExperimentConfig, default_jobs
from haptica_codex.features import FeatureSeries
from haptica_codex.taxels import TaxelTrial

from .dataset import DatasetSpec, generate_dataset, load_dataset
from .harness import (
    ClassifierSpec,
    ExperimentReport,
    SweepTable,
    baseline_classifiers,
    cross_validate_many,
    extract_dataset,
    generalization,
    resolution_sweep,
    state_sweep,
)


logger = structlog.get_logger()

REPORT_FILE = "report.yaml"
TIMING_FILE = "timing.yaml"


@dataclass
class RunResult:
    """Reports of one run; headline is the report written to confusion.csv."""

    kind: str
    reports: List[ExperimentReport] = field(default_factory=list)
    table: Optional[SweepTable] = None
    headline: int = -1
    generation_failures: int = 0
    skipped_trials: int = 0

    @property
    def failed(self) -> bool:
        return self.generation_failures > 0 or any(r.failed_cells for r in self.reports)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "kind": self.kind,
            "generation_failures": self.generation_failures,
            "skipped_trials": self.skipped_trials,
            "reports": [report.to_dict() for report in self.reports],
        }
        if self.table is not None:
            data["table"] = self.table.to_dict()
        return data


class ExperimentRunner:
    """Runs one ExperimentConfig end to end."""

    def __init__(self, config: ExperimentConfig, jobs: Optional[int] = None):
        self.config = config
        self.jobs = jobs or config.jobs or default_jobs()
        self.out_dir = config.output_path()
        self.timings: Dict[str, float] = {}

    def run(self) -> RunResult:
        cfg = self.config
        logger.info(
            "starting_experiment", kind=cfg.kind, seed=cfg.seed, jobs=self.jobs, out=str(self.out_dir)
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()

        trials, generation_failures = self._timed("dataset", self.load_trials)
        features = self._timed(
            "features",
            lambda: extract_dataset(trials, cfg.window, cfg.connectivity, self.jobs),
        )
        result = self._timed("evaluation", lambda: self.evaluate(trials, features))
        result.generation_failures = generation_failures
        result.skipped_trials = len(trials) - len(features)
        self.timings["total"] = time.perf_counter() - started
        for report in result.reports:
            report.wall_time = self.timings["evaluation"]

        self.write_outputs(result)
        logger.info(
            "experiment_finished",
            kind=cfg.kind,
            reports=len(result.reports),
            failed=result.failed,
            wall_time=round(self.timings["total"], 3),
        )
        return result

    def _timed(self, stage: str, func):
        started = time.perf_counter()
        value = func()
        self.timings[stage] = time.perf_counter() - started
        return value

    def load_trials(self):
        """Trials from the configured directory, or freshly generated under the output directory."""
        cfg = self.config
        if cfg.dataset is not None:
            return load_dataset(Path(cfg.dataset)), 0
        spec = DatasetSpec.preset(cfg.generate)
        if cfg.trials_per_cell is not None:
            spec.trials_per_cell = cfg.trials_per_cell
        dataset_dir = self.out_dir / "dataset"
        generated = generate_dataset(spec, dataset_dir, seed=cfg.seed, jobs=self.jobs)
        return load_dataset(dataset_dir), len(generated.failures)

    def evaluate(self, trials: List[TaxelTrial], features: List[FeatureSeries]) -> RunResult:
        cfg = self.config
        train = cfg.train_config()

        def hmm(feature_set: FeatureSet) -> ClassifierSpec:
            return ClassifierSpec.hmm(feature_set, train, cfg.on_degenerate)

        length = int(round(cfg.window * trials[0].sample_rate)) if trials else 0
        cv = dict(folds=cfg.folds, seed=cfg.seed, jobs=self.jobs)

        if cfg.kind == "cv4":
            reports = cross_validate_many(
                features, [hmm(FeatureSet.FORCE), hmm(FeatureSet.AREA)], **cv
            )
            return RunResult(cfg.kind, reports, headline=0)
        if cfg.kind == "multivariate_cv":
            reports = cross_validate_many(features, [hmm(FeatureSet.FORCE_MOTION)], **cv)
            return RunResult(cfg.kind, reports)
        if cfg.kind == "baseline_cv":
            classifiers = baseline_classifiers(
                length, cfg.pca_components, cfg.neighbors, stereotyped=True
            ) + [hmm(FeatureSet.FORCE), hmm(FeatureSet.FORCE_MOTION)]
            return RunResult(cfg.kind, cross_validate_many(features, classifiers, **cv))
        if cfg.kind == "state_sweep":
            table, reports = state_sweep(
                features, cfg.n_states, cfg.feature_set_enum, train,
                on_degenerate=cfg.on_degenerate, **cv,
            )
            best = max(range(len(reports)), key=lambda i: (reports[i].accuracy, -i))
            return RunResult(cfg.kind, reports, table, headline=best)
        if cfg.kind == "resolution_sweep":
            table, reports = resolution_sweep(
                trials, cfg.pool_factors, train,
                window=cfg.window, connectivity=cfg.connectivity,
                on_degenerate=cfg.on_degenerate, **cv,
            )
            return RunResult(cfg.kind, reports, table, headline=0)
        # generalization
        classifiers = baseline_classifiers(
            length, cfg.pca_components, cfg.neighbors, stereotyped=False
        ) + [hmm(FeatureSet.FORCE), hmm(FeatureSet.FORCE_MOTION)]
        table, reports = generalization(features, classifiers, jobs=self.jobs)
        return RunResult(cfg.kind, reports, table)

    def write_outputs(self, result: RunResult):
        out = self.out_dir
        self.config.save(out / "config.yaml")
        if result.reports:
            write_confusion(out / "confusion.csv", result.reports[result.headline])
            for report in result.reports:
                write_confusion(out / f"confusion_{report.name}.csv", report)
        write_summary(out / "summary.csv", result)
        with open(out / REPORT_FILE, "w") as f:
            yaml.safe_dump(result.to_dict(), f, default_flow_style=False, sort_keys=False)
        with open(out / TIMING_FILE, "w") as f:
            yaml.safe_dump(
                {stage: float(seconds) for stage, seconds in self.timings.items()},
                f,
                default_flow_style=False,
                sort_keys=False,
            )
        logger.info("reports_written", out=str(out))


def write_confusion(path: Path, report: ExperimentReport):
    """4x4 counts, rows true category, columns predicted category."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["true\\predicted", *(c.value for c in CATEGORY_ORDER)])
        for category, row in zip(CATEGORY_ORDER, report.confusion):
            writer.writerow([category.value, *(int(v) for v in row)])


def write_summary(path: Path, result: RunResult):
    """Sweep rows when the run has a table, else one row per report."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if result.table is not None:
            writer.writerow(result.table.columns)
            for row in result.table.rows:
                writer.writerow([row[column] for column in result.table.columns])
            return
        writer.writerow(
            ["name", "accuracy", *(f"accuracy_{c.value}" for c in CATEGORY_ORDER), "total", "failed_cells"]
        )
        for report in result.reports:
            per_class = report.per_class_accuracy()
            writer.writerow(
                [
                    report.name,
                    report.accuracy,
                    *(per_class[c] for c in CATEGORY_ORDER),
                    report.total,
                    report.failed_cells,
                ]
            )


def _percent(value: float) -> str:
    return f"{100.0 * value:.2f}"


def render_report(data: Dict[str, Any]) -> str:
    """Human-readable tables of a stored report, accuracies in percent to two decimals."""
    lines = [f"Experiment: {data['kind']}"]
    if data.get("generation_failures"):
        lines.append(f"Failed trial generations: {data['generation_failures']}")
    if data.get("skipped_trials"):
        lines.append(f"Trials without contact: {data['skipped_trials']}")

    table = data.get("table")
    if table:
        lines.append("")
        lines.append(f"{table['name']}:")
        columns = table["columns"]
        lines.append("  " + "  ".join(f"{c:>18}" for c in columns))
        for row in table["rows"]:
            cells = []
            for column in columns:
                value = row[column]
                is_accuracy = column.endswith("accuracy") or column.startswith(("hmm_", "baseline_"))
                if isinstance(value, float) and is_accuracy:
                    cells.append(f"{_percent(value):>18}")
                elif isinstance(value, float):
                    cells.append(f"{value:>18.4g}")
                else:
                    cells.append(f"{value!s:>18}")
            lines.append("  " + "  ".join(cells))

    for report in data.get("reports", []):
        labels = report["labels"]
        lines.append("")
        lines.append(
            f"{report['name']}: accuracy {_percent(report['accuracy'])}% "
            f"({report['total']} trials, {report['failed_cells']} failed cells)"
        )
        lines.append("  " + " " * 6 + "".join(f"{label:>8}" for label in labels))
        for label, row in zip(labels, report["confusion"]):
            lines.append(f"  {label:<6}" + "".join(f"{v:>8}" for v in row))
        per_class = report["per_class_accuracy"]
        lines.append(
            "  per class: " + ", ".join(f"{label} {_percent(per_class[label])}%" for label in labels)
        )
    return "\n".join(lines)


def load_report(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    with open(path) as f:
        return yaml.safe_load(f)
