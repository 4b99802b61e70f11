"""
Render simulated contact forces as taxel-array trials.

The contact patch is the set of taxels closest to a contact centre. Its size
grows with the contact force (soft objects spread the load over more taxels),
the force is split evenly across the patch, and Gaussian noise is added to
every taxel.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from haptica_codex.categories import Category, Condition
from haptica_codex.taxels import (
    DEFAULT_COLS,
    DEFAULT_CONTACT_THRESHOLD,
    DEFAULT_PITCH,
    DEFAULT_ROWS,
    TaxelFrame,
    TaxelTrial,
)

from .contact_sim import SimTrajectory


@dataclass(frozen=True)
class RenderParams:
    """Sensor geometry and force-to-footprint mapping."""

    rows: int = DEFAULT_ROWS
    cols: int = DEFAULT_COLS
    taxel_pitch: float = DEFAULT_PITCH
    contact_center: Tuple[float, float] = (11.5, 7.5)
    area_gain: float = 1.0  # taxels per N
    max_radius: float = 5.0  # taxels
    noise_std: float = 0.0  # N
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.area_gain < 0:
            raise ValueError(f"area_gain must be >= 0, got {self.area_gain}")
        row, col = self.contact_center
        r = self.max_radius
        if row - r < 0 or row + r > self.rows - 1 or col - r < 0 or col + r > self.cols - 1:
            raise ValueError(
                f"patch of radius {r} around {self.contact_center} leaves the "
                f"{self.rows}x{self.cols} grid"
            )

    def footprint(self) -> List[Tuple[int, int]]:
        """Taxels within max_radius of the centre, nearest first."""
        row_c, col_c = self.contact_center
        candidates = []
        for row in range(self.rows):
            for col in range(self.cols):
                distance = float(np.hypot(row - row_c, col - col_c))
                if distance <= self.max_radius:
                    candidates.append((distance, row, col))
        candidates.sort()
        return [(row, col) for _, row, col in candidates]

    def patch_size(self, force: float, capacity: int) -> int:
        if force <= 0:
            return 0
        return int(min(max(np.floor(self.area_gain * force + 0.5), 1), capacity))


def render_taxels(
    traj: SimTrajectory,
    rp: RenderParams,
    sample_rate: float,
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD,
    label: Optional[Category] = None,
    condition: Optional[Condition] = None,
) -> TaxelTrial:
    """Downsample a trajectory to sample_rate and deposit its contact force on a grid."""
    if not 0 < sample_rate <= 1.0 / traj.dt + 1e-9:
        raise ValueError(f"sample rate {sample_rate} Hz exceeds the integration rate")
    stride = int(round(1.0 / (sample_rate * traj.dt)))
    if not np.isclose(stride * sample_rate * traj.dt, 1.0):
        raise ValueError(f"sample rate {sample_rate} Hz is not a divisor of {1.0 / traj.dt} Hz")

    footprint = rp.footprint()
    patch_rows = np.array([row for row, _ in footprint], dtype=int)
    patch_cols = np.array([col for _, col in footprint], dtype=int)
    rng = np.random.default_rng(rp.seed)

    indices = np.arange(0, len(traj), stride)
    frames = []
    for index in indices:
        force = float(traj.F_surf[index])
        grid = np.zeros((rp.rows, rp.cols))
        size = rp.patch_size(force, len(footprint))
        if size:
            grid[patch_rows[:size], patch_cols[:size]] = force / size
        if rp.noise_std > 0:
            grid = np.maximum(grid + rng.normal(0.0, rp.noise_std, grid.shape), 0.0)
        frames.append(TaxelFrame(grid, rp.taxel_pitch))

    return TaxelTrial(
        tuple(frames),
        sample_rate,
        label,
        condition,
        contact_threshold,
        arm_position=traj.x_arm[indices],
    )
