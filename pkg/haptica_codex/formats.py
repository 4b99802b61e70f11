"""
Plain-text file formats for trials, feature series, models and manifests.

All writers produce the same bytes for the same data, and every reader
restores the written values exactly.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .categories import Condition, format_label, parse_label
from .errors import ModelFormatError, TrialFormatError
from .features import FeatureSeries
from .models.gaussian_hmm import TOPOLOGY_ERGODIC, TOPOLOGY_LEFT_RIGHT, GaussianHmm
from .taxels import TaxelFrame, TaxelTrial


ARM_SUFFIX = ".arm"
NO_CONDITION = "none"
MANIFEST_HEADER = ("file", "label", "velocity_setting", "stiffness_setting", "seed")


def format_decimal(value: float) -> str:
    """Shortest positional decimal text that reads back to the same float."""
    return np.format_float_positional(float(value), unique=True, trim="-")


def format_model_value(value: float) -> str:
    return format(float(value), ".17g")


def _join(values: Iterable[float]) -> str:
    return ",".join(format_decimal(v) for v in values)


def _parse_floats(line: str, path: Path, line_no: int, error=TrialFormatError) -> List[float]:
    try:
        return [float(token) for token in line.strip().split(",")]
    except ValueError:
        raise error(f"{path}:{line_no}: expected comma-separated numbers") from None


def arm_path_for(trial_path: Path) -> Path:
    trial_path = Path(trial_path)
    return trial_path.with_name(trial_path.name + ARM_SUFFIX)


# -- trials -------------------------------------------------------------------

def write_trial(path: Path, trial: TaxelTrial):
    """Write a trial file, plus its arm-position sidecar when the trial has one."""
    path = Path(path)
    condition = trial.condition
    header = [
        str(trial.rows),
        str(trial.cols),
        format_decimal(trial.sample_rate),
        format_decimal(trial.contact_threshold),
        format_label(trial.label),
        condition.velocity if condition else NO_CONDITION,
        condition.stiffness if condition else NO_CONDITION,
    ]
    lines = [",".join(header)]
    lines.extend(_join(frame.forces.ravel()) for frame in trial.frames)
    path.write_text("\n".join(lines) + "\n")
    if trial.arm_position is not None:
        arm_path_for(path).write_text("\n".join(format_decimal(x) for x in trial.arm_position) + "\n")


def read_trial(path: Path) -> TaxelTrial:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise TrialFormatError(f"{path}: empty trial file")
    header = lines[0].strip().split(",")
    if len(header) != 7:
        raise TrialFormatError(f"{path}:1: header needs 7 fields, got {len(header)}")
    try:
        rows, cols = int(header[0]), int(header[1])
        sample_rate, threshold = float(header[2]), float(header[3])
        label = parse_label(header[4])
    except ValueError as e:
        raise TrialFormatError(f"{path}:1: {e}") from None
    velocity, stiffness = header[5].strip(), header[6].strip()
    condition = None
    if velocity != NO_CONDITION or stiffness != NO_CONDITION:
        condition = Condition(velocity, stiffness)

    frames = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        values = _parse_floats(line, path, line_no)
        if len(values) != rows * cols:
            raise TrialFormatError(
                f"{path}:{line_no}: expected {rows * cols} values, got {len(values)}"
            )
        try:
            frames.append(TaxelFrame(np.array(values).reshape(rows, cols)))
        except ValueError as e:
            raise TrialFormatError(f"{path}:{line_no}: {e}") from None

    arm = None
    arm_path = arm_path_for(path)
    if arm_path.exists():
        arm = np.array([float(x) for x in arm_path.read_text().split()])
    try:
        return TaxelTrial(tuple(frames), sample_rate, label, condition, threshold, arm)
    except ValueError as e:
        raise TrialFormatError(f"{path}: {e}") from None


# -- feature series -------------------------------------------------------------

def write_features(path: Path, series: FeatureSeries):
    lines = [
        f"{len(series)},{format_label(series.label)}",
        _join(series.t),
        _join(series.f_max),
        _join(series.area),
        _join(series.d),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_features(path: Path, condition: Optional[Condition] = None) -> FeatureSeries:
    path = Path(path)
    lines = [line for line in path.read_text().splitlines() if line.strip()]
    if len(lines) != 5:
        raise TrialFormatError(f"{path}: expected a header and 4 series lines, got {len(lines)}")
    header = lines[0].split(",")
    if len(header) != 2:
        raise TrialFormatError(f"{path}:1: header must be 'length,label'")
    try:
        length = int(header[0])
        label = parse_label(header[1])
    except ValueError as e:
        raise TrialFormatError(f"{path}:1: {e}") from None
    channels = [_parse_floats(line, path, no) for no, line in enumerate(lines[1:], start=2)]
    if any(len(channel) != length for channel in channels):
        raise TrialFormatError(f"{path}: every series must have {length} values")
    t, f_max, area, d = channels
    return FeatureSeries(t, f_max, area, d, 0, label, condition)


# -- models -------------------------------------------------------------------

def write_model(path: Path, model: GaussianHmm):
    lines = [f"{model.n_states},{model.dim},{model.topology}"]
    lines.append(",".join(format_model_value(p) for p in model.initial))
    for row in model.transitions:
        lines.append(",".join(format_model_value(p) for p in row))
    for mean, cov in zip(model.means, model.covariances):
        lines.append(",".join(format_model_value(v) for v in [*mean, *cov.ravel()]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path: Path) -> GaussianHmm:
    path = Path(path)
    lines = [line for line in path.read_text().splitlines() if line.strip()]
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    header = lines[0].split(",")
    if len(header) != 3 or header[2] not in (TOPOLOGY_LEFT_RIGHT, TOPOLOGY_ERGODIC):
        raise ModelFormatError(f"{path}:1: header must be 'n_states,dim,topology'")
    try:
        n_states, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ModelFormatError(f"{path}:1: n_states and dim must be integers") from None
    if len(lines) != 1 + 1 + 2 * n_states:
        raise ModelFormatError(f"{path}: expected {2 + 2 * n_states} lines, got {len(lines)}")

    def floats(index: int, expected: int) -> np.ndarray:
        values = _parse_floats(lines[index], path, index + 1, ModelFormatError)
        if len(values) != expected:
            raise ModelFormatError(f"{path}:{index + 1}: expected {expected} values")
        return np.array(values)

    initial = floats(1, n_states)
    transitions = np.array([floats(2 + i, n_states) for i in range(n_states)])
    emissions = [floats(2 + n_states + i, dim + dim * dim) for i in range(n_states)]
    means = np.array([row[:dim] for row in emissions])
    covariances = np.array([row[dim:].reshape(dim, dim) for row in emissions])
    try:
        return GaussianHmm(
            transitions, initial, means, covariances, header[2] == TOPOLOGY_LEFT_RIGHT
        )
    except ValueError as e:
        raise ModelFormatError(f"{path}: {e}") from None


# -- manifests ------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    """One row of a dataset manifest."""

    file: str
    label: str
    velocity_setting: str
    stiffness_setting: str
    seed: int

    @property
    def condition(self) -> Optional[Condition]:
        if self.velocity_setting == NO_CONDITION and self.stiffness_setting == NO_CONDITION:
            return None
        return Condition(self.velocity_setting, self.stiffness_setting)


def write_manifest(path: Path, entries: Sequence[ManifestEntry]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for entry in entries:
            writer.writerow(
                [entry.file, entry.label, entry.velocity_setting, entry.stiffness_setting, entry.seed]
            )


def read_manifest(path: Path) -> List[ManifestEntry]:
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_HEADER:
            raise TrialFormatError(f"{path}:1: manifest header must be {','.join(MANIFEST_HEADER)}")
        entries = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise TrialFormatError(f"{path}:{line_no}: expected {len(MANIFEST_HEADER)} fields")
            try:
                entries.append(ManifestEntry(row[0], row[1], row[2], row[3], int(row[4])))
            except ValueError:
                raise TrialFormatError(f"{path}:{line_no}: seed must be an integer") from None
    return entries
