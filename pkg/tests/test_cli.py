import sys

import pytest
import structlog
import yaml

from haptica_codex.categories import Category
from haptica_engine.harness import ExperimentReport
from haptica_rune.cli import main


@pytest.fixture(autouse=True)
def _restore_logging():
    yield
    structlog.reset_defaults()


def run(monkeypatch, *argv):
    monkeypatch.setattr(sys, "argv", ["haptica-rune", *argv])
    return main()


def test_no_command_prints_help(monkeypatch, capsys):
    assert run(monkeypatch) == 1
    assert "generate" in capsys.readouterr().out


def test_generate_extract_train_classify(monkeypatch, capsys, tmp_path):
    data, feats, models = tmp_path / "data", tmp_path / "feats", tmp_path / "models"
    assert run(
        monkeypatch, "generate", "--trials-per-cell", "2", "--out", str(data), "--jobs", "1"
    ) == 0
    assert len(list(data.glob("trial_*.csv"))) == 8

    assert run(monkeypatch, "extract", str(data), "--out", str(feats)) == 0
    feature_files = sorted(feats.glob("*.feat"))
    assert len(feature_files) == 8

    assert run(monkeypatch, "train", str(feats), "--states", "3", "--out", str(models)) == 0
    assert len(list(models.glob("*.hmm"))) == 4
    capsys.readouterr()

    assert run(monkeypatch, "classify", str(models), *map(str, feature_files[:2])) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    path, truth, predicted, score = lines[0].split("\t")
    assert truth == "RF"
    assert predicted in {"RF", "RM", "SF", "SM"}
    float(score)


def test_report_renders_stored_file(monkeypatch, capsys, tmp_path):
    report = ExperimentReport("hmm_force")
    report.record(Category.SF, Category.SF)
    with open(tmp_path / "report.yaml", "w") as f:
        yaml.safe_dump({"kind": "cv4", "reports": [report.to_dict()]}, f)
    assert run(monkeypatch, "report", str(tmp_path)) == 0
    assert "hmm_force: accuracy 100.00%" in capsys.readouterr().out


def test_failures_return_nonzero(monkeypatch, tmp_path):
    assert run(monkeypatch, "report", str(tmp_path / "missing.yaml")) == 1
    bad = tmp_path / "experiment.yaml"
    bad.write_text("kind: cv5\ngenerate: stereotyped\n")
    assert run(monkeypatch, "experiment", "--config", str(bad)) == 1
