"""
Haptica Rune - CLI entry point.
"""

import sys
import argparse
from pathlib import Path

import structlog

from haptica_codex.categories import FeatureSet, format_label
from haptica_codex.config import ExperimentConfig, HapticaPaths, default_jobs
from haptica_codex.errors import NoContact


logger = structlog.get_logger()

FEATURE_SUFFIX = ".feat"


def _jobs(args) -> int:
    return args.jobs or default_jobs()


def cmd_generate(args):
    """Generate a synthetic dataset."""
    from haptica_engine.dataset import DatasetSpec, generate_dataset

    spec = DatasetSpec.load(Path(args.config)) if args.config else DatasetSpec.preset(args.preset)
    if args.trials_per_cell is not None:
        spec.trials_per_cell = args.trials_per_cell
    out = Path(args.out) if args.out else HapticaPaths.get_data_dir() / "dataset"
    result = generate_dataset(spec, out, seed=args.seed, jobs=_jobs(args))

    print(f"Wrote {len(result.entries)} trials to {out}")
    if result.failures:
        print(f"{len(result.failures)} trials failed:")
        for index, error in result.failures:
            print(f"  trial {index}: {error}")
        for category, condition in result.aborted_cells:
            print(f"  skipped cell {category.value} at {condition}")
        return 1


def cmd_extract(args):
    """Extract feature files from every trial of a dataset."""
    from haptica_codex.features import extract_features
    from haptica_codex.formats import read_manifest, read_trial, write_features
    from haptica_engine.dataset import MANIFEST_NAME

    dataset = Path(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = skipped = 0
    for entry in read_manifest(dataset / MANIFEST_NAME):
        trial = read_trial(dataset / entry.file)
        try:
            series = extract_features(trial, args.window, connectivity=args.connectivity)
        except NoContact as e:
            logger.warning("trial_skipped_no_contact", file=entry.file, error=str(e))
            skipped += 1
            continue
        write_features(out / (Path(entry.file).stem + FEATURE_SUFFIX), series)
        written += 1
    print(f"Wrote {written} feature files to {out} ({skipped} trials without contact)")


def _read_feature_dir(directory: Path):
    from haptica_codex.formats import read_features

    paths = sorted(Path(directory).glob(f"*{FEATURE_SUFFIX}"))
    if not paths:
        raise FileNotFoundError(f"no {FEATURE_SUFFIX} files in {directory}")
    return [read_features(path) for path in paths]


def cmd_train(args):
    """Train one HMM per category and save the bank."""
    from haptica_codex.models import HmmBank, TrainConfig, train_bank

    training = _read_feature_dir(Path(args.features))
    if args.config:
        cfg = ExperimentConfig.load(Path(args.config)).train_config(args.states)
    else:
        cfg = TrainConfig(n_states=args.states or 10)
    feature_set = FeatureSet(args.feature_set)
    out = Path(args.out)
    bank = HmmBank.load(out) if args.append and out.exists() else None
    bank = train_bank(training, feature_set, cfg, bank, on_degenerate=args.on_degenerate)
    bank.save(out)
    print(f"Saved {feature_set.value} models ({cfg.n_states} states) to {out}")


def cmd_classify(args):
    """Classify feature files or trial files with a saved bank."""
    from haptica_codex.features import extract_features
    from haptica_codex.formats import read_features, read_trial
    from haptica_codex.models import HmmBank, classify

    bank = HmmBank.load(Path(args.models))
    feature_set = FeatureSet(args.feature_set)
    status = 0
    for name in args.inputs:
        path = Path(name)
        try:
            if path.suffix == FEATURE_SUFFIX:
                series = read_features(path)
            else:
                series = extract_features(read_trial(path), args.window)
        except NoContact as e:
            print(f"{path}\t{format_label(None)}\tno contact")
            logger.warning("trial_skipped_no_contact", file=str(path), error=str(e))
            status = 1
            continue
        category, scores = classify(bank, series, feature_set, args.on_degenerate)
        print(f"{path}\t{format_label(series.label)}\t{category.value}\t{scores[category]:.4f}")
    return status


def cmd_experiment(args):
    """Run an experiment configuration."""
    from haptica_engine.runner import ExperimentRunner

    config = ExperimentConfig.load(Path(args.config))
    if args.seed is not None:
        config.seed = args.seed
    if args.out:
        config.output_dir = args.out
    if args.jobs:
        config.jobs = args.jobs
    config.validate()

    result = ExperimentRunner(config).run()
    for report in result.reports:
        print(f"{report.name:<28} accuracy {100.0 * report.accuracy:6.2f}%")
    print(f"Reports written to {config.output_path()}")
    return 1 if result.failed else 0


def cmd_report(args):
    """Render a stored report."""
    from haptica_engine.runner import load_report, render_report

    print(render_report(load_report(Path(args.path))))


def main():
    """Main CLI entry point."""
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(),
        ]
    )

    parser = argparse.ArgumentParser(
        description="Haptica Rune - tactile contact classification toolkit"
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    feature_sets = [fs.value for fs in FeatureSet]

    # Generate command
    parser_generate = subparsers.add_parser("generate", help="Generate a synthetic dataset")
    parser_generate.add_argument("--preset", default="stereotyped", help="Dataset preset name")
    parser_generate.add_argument("--config", help="Dataset specification file (YAML)")
    parser_generate.add_argument("--trials-per-cell", type=int, help="Override trials per cell")
    parser_generate.add_argument("--seed", type=int, default=0, help="Master seed")
    parser_generate.add_argument("--out", help="Output directory")
    parser_generate.add_argument("--jobs", type=int, help="Worker processes")
    parser_generate.set_defaults(func=cmd_generate)

    # Extract command
    parser_extract = subparsers.add_parser("extract", help="Write feature files for a dataset")
    parser_extract.add_argument("dataset", help="Dataset directory")
    parser_extract.add_argument("--out", required=True, help="Feature directory")
    parser_extract.add_argument("--window", type=float, default=1.2, help="Window length (s)")
    parser_extract.add_argument("--connectivity", type=int, choices=(4, 8), default=4)
    parser_extract.set_defaults(func=cmd_extract)

    # Train command
    parser_train = subparsers.add_parser("train", help="Train a category HMM bank")
    parser_train.add_argument("features", help="Directory of feature files")
    parser_train.add_argument("--feature-set", choices=feature_sets, default="force")
    parser_train.add_argument("--states", type=int, help="Number of HMM states")
    parser_train.add_argument("--config", help="Experiment configuration with training settings")
    parser_train.add_argument("--out", required=True, help="Model directory")
    parser_train.add_argument(
        "--append",
        action="store_true",
        help="Keep models of other feature sets already in the directory",
    )
    parser_train.add_argument("--on-degenerate", choices=("raise", "center"), default="center")
    parser_train.set_defaults(func=cmd_train)

    # Classify command
    parser_classify = subparsers.add_parser("classify", help="Classify trials or feature files")
    parser_classify.add_argument("models", help="Model directory")
    parser_classify.add_argument("inputs", nargs="+", help="Feature (.feat) or trial files")
    parser_classify.add_argument("--feature-set", choices=feature_sets, default="force")
    parser_classify.add_argument("--window", type=float, default=1.2, help="Window length (s)")
    parser_classify.add_argument("--on-degenerate", choices=("raise", "center"), default="center")
    parser_classify.set_defaults(func=cmd_classify)

    # Experiment command
    parser_experiment = subparsers.add_parser("experiment", help="Run an experiment configuration")
    parser_experiment.add_argument("--config", required=True, help="Experiment file (YAML)")
    parser_experiment.add_argument("--seed", type=int, help="Override the configured seed")
    parser_experiment.add_argument("--out", help="Override the output directory")
    parser_experiment.add_argument("--jobs", type=int, help="Worker processes")
    parser_experiment.set_defaults(func=cmd_experiment)

    # Report command
    parser_report = subparsers.add_parser("report", help="Render a stored report")
    parser_report.add_argument("path", help="Report file or experiment output directory")
    parser_report.set_defaults(func=cmd_report)

    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        return 1

    try:
        return args.func(args) or 0
    except Exception as e:
        logger.error("command_failed", command=args.command, error=str(e), exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
