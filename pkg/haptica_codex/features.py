"""
Contact features over the post-onset window.

Per frame, the largest connected contact region yields three features:
the maximum taxel force inside it, its area in taxels, and the distance its
centroid has travelled in the world frame since the onset of contact.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import structlog

from .categories import Category, Condition
from .errors import DegenerateSeries, NoContact
from .taxels import TaxelTrial, connected_components, largest_component, threshold_frame


logger = structlog.get_logger()

DEFAULT_WINDOW = 1.2  # s

CHANNELS = ("f_max", "area", "d")

ON_DEGENERATE_RAISE = "raise"
ON_DEGENERATE_CENTER = "center"


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FeatureSeries:
    """Per-timestep (F_max, area, d) over the post-onset window."""

    t: np.ndarray
    f_max: np.ndarray
    area: np.ndarray
    d: np.ndarray
    onset_index: int = 0
    label: Optional[Category] = None
    condition: Optional[Condition] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("t", "f_max", "area", "d"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        lengths = {len(self.t), len(self.f_max), len(self.area), len(self.d)}
        if len(lengths) != 1 or len(self.t) < 1:
            raise ValueError(f"feature series must share one non-zero length, got {lengths}")
        if self.d[0] != 0:
            raise ValueError("displacement must start at 0 at the onset of contact")
        if np.any(self.f_max < 0) or np.any(self.area < 0) or np.any(self.d < 0):
            raise ValueError("features must be non-negative")

    def __len__(self) -> int:
        return len(self.t)

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise KeyError(f"unknown feature channel '{name}', expected one of {CHANNELS}")
        return getattr(self, name)

    def with_channel(self, name: str, values: np.ndarray) -> "FeatureSeries":
        data = {channel: self.channel(channel) for channel in CHANNELS}
        data[name] = values
        return FeatureSeries(
            self.t, data["f_max"], data["area"], data["d"],
            self.onset_index, self.label, self.condition,
        )


@dataclass(frozen=True)
class ScaledSeries:
    """A feature channel standardized with its own mean and standard deviation."""

    values: np.ndarray
    mean_used: float
    std_used: float

    def restore(self) -> np.ndarray:
        return self.values * self.std_used + self.mean_used


def detect_onset(trial: TaxelTrial) -> int:
    """Index of the first frame whose maximum taxel force exceeds the contact threshold."""
    if len(trial) == 0:
        raise NoContact("trial has no frames")
    peaks = trial.stacked().max(axis=(1, 2))
    above = np.flatnonzero(peaks > trial.contact_threshold)
    if above.size == 0:
        raise NoContact(
            f"no frame exceeds the contact threshold of {trial.contact_threshold} N"
        )
    return int(above[0])


def extract_features(
    trial: TaxelTrial,
    window: float = DEFAULT_WINDOW,
    arm_position: Optional[np.ndarray] = None,
    connectivity: int = 4,
    onset: Optional[int] = None,
) -> FeatureSeries:
    """Compute F_max, area and centroid displacement over the window after onset.

    Args:
        trial: Source trial; its contact threshold is used for both onset
            detection and per-frame thresholding.
        window: Window length in seconds.
        arm_position: Arm translation per frame (m). Defaults to the trial's
            own arm positions, or zero motion when it has none.
        connectivity: 4 or 8 neighbourhood for segmentation.
        onset: Frame at which the window opens. Detected from the trial when
            omitted; pooled trials pass the onset of their full-resolution source.

    Returns:
        A series of exactly round(window * sample_rate) samples. Trials that end
        before the window closes are padded with each channel's trial mean.
    """
    if not window > 0:
        raise ValueError(f"window must be positive, got {window}")
    if onset is None:
        onset = detect_onset(trial)
    elif not 0 <= onset < len(trial):
        raise ValueError(f"onset {onset} is outside the trial's {len(trial)} frames")
    n_samples = int(round(window * trial.sample_rate))
    if arm_position is None:
        arm_position = trial.arm_position
    if arm_position is None:
        arm = np.zeros(len(trial))
    else:
        arm = np.asarray(arm_position, dtype=float)
        if arm.shape != (len(trial),):
            raise ValueError(f"arm position has {arm.shape} samples, expected ({len(trial)},)")

    end = min(onset + n_samples, len(trial))
    pitch = trial.taxel_pitch
    f_max, area, d = [], [], []
    origin = None
    for index in range(onset, end):
        frame = trial.frames[index]
        mask = threshold_frame(frame, trial.contact_threshold)
        region = largest_component(connected_components(mask, connectivity))
        if region is None:
            f_max.append(0.0)
            area.append(0.0)
            d.append(d[-1] if d else 0.0)
            continue
        rows, cols = region.rows_cols()
        f_max.append(float(frame.forces[rows, cols].max()))
        area.append(float(region.area))
        row_c, col_c = region.centroid
        world = np.array([arm[index] + row_c * pitch, col_c * pitch])
        if origin is None:
            origin = world
        d.append(float(np.linalg.norm(world - origin)))

    observed = len(f_max)
    if observed < n_samples:
        missing = n_samples - observed
        logger.warning(
            "trial_padded", label=str(trial.label), observed=observed, padded=missing
        )
        f_max += [float(np.mean(f_max))] * missing
        area += [float(np.round(np.mean(area)))] * missing
        d += [float(np.mean(d))] * missing

    t = np.arange(n_samples) / trial.sample_rate
    return FeatureSeries(t, f_max, area, d, onset, trial.label, trial.condition)


def scale_features(values: np.ndarray) -> ScaledSeries:
    """Standardize a series with its own mean and population standard deviation."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateSeries(f"need at least 2 samples to scale, got {values.size}")
    mean = float(values.mean())
    std = float(values.std())
    if std == 0.0 or not np.isfinite(std):
        raise DegenerateSeries(f"series is constant at {mean}")
    return ScaledSeries((values - mean) / std, mean, std)


def standardize(values: np.ndarray, on_degenerate: str = ON_DEGENERATE_RAISE) -> np.ndarray:
    """Scaled values, or the mean-centred series for constant input when asked to."""
    try:
        return scale_features(values).values
    except DegenerateSeries:
        if on_degenerate != ON_DEGENERATE_CENTER:
            raise
        values = np.asarray(values, dtype=float)
        logger.debug("degenerate_series_centered", length=values.size)
        return values - values.mean()


def time_normalize(series: np.ndarray, target_len: int) -> np.ndarray:
    """Linearly resample a series onto target_len points over the same time support."""
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or series.size < 2:
        raise ValueError(f"series must be 1-D with at least 2 samples, got shape {series.shape}")
    if target_len < 2:
        raise ValueError(f"target length must be >= 2, got {target_len}")
    if target_len == series.size:
        return series.copy()
    source = np.arange(series.size, dtype=float)
    target = np.linspace(0.0, series.size - 1.0, target_len)
    resampled = np.interp(target, source, series)
    resampled[0], resampled[-1] = series[0], series[-1]
    return resampled
