"""
Taxel-array data types and image-level preprocessing.

A frame is treated as a gray-scale force image: it is thresholded into a
binary contact mask, segmented into connected components, and the component
with the largest area is taken as the contact region. Frames can be pooled
into coarser grids to emulate lower sensor resolutions.
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .categories import Category, Condition
from .errors import NonDivisibleGrid


DEFAULT_ROWS = 24
DEFAULT_COLS = 16
DEFAULT_PITCH = 0.009  # m
DEFAULT_SAMPLE_RATE = 100.0  # Hz
DEFAULT_CONTACT_THRESHOLD = 0.5  # N

POOL_FULL = "full"

PoolFactor = Union[int, str]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TaxelFrame:
    """One sample of the taxel array: a rows x cols grid of forces in newtons."""

    forces: np.ndarray
    taxel_pitch: float = DEFAULT_PITCH

    def __post_init__(self):
        forces = np.array(self.forces, dtype=float)
        if forces.ndim != 2 or forces.size == 0:
            raise ValueError(f"taxel frame must be a non-empty 2-D grid, got shape {forces.shape}")
        if not np.all(np.isfinite(forces)) or np.any(forces < 0):
            raise ValueError("taxel forces must be finite and non-negative")
        if not self.taxel_pitch > 0:
            raise ValueError(f"taxel pitch must be positive, got {self.taxel_pitch}")
        object.__setattr__(self, "forces", _frozen(forces))

    @classmethod
    def zeros(
        cls, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS, taxel_pitch: float = DEFAULT_PITCH
    ) -> "TaxelFrame":
        return cls(np.zeros((rows, cols)), taxel_pitch)

    @property
    def rows(self) -> int:
        return self.forces.shape[0]

    @property
    def cols(self) -> int:
        return self.forces.shape[1]

    @property
    def total_force(self) -> float:
        return float(self.forces.sum())

    @property
    def resolution_per_cm2(self) -> float:
        """Taxel density of the sensor surface in taxels/cm^2."""
        pitch_cm = self.taxel_pitch * 100.0
        return 1.0 / (pitch_cm * pitch_cm)


@dataclass(frozen=True)
class TaxelTrial:
    """Time-ordered frames of one contact trial."""

    frames: Tuple[TaxelFrame, ...]
    sample_rate: float = DEFAULT_SAMPLE_RATE
    label: Optional[Category] = None
    condition: Optional[Condition] = None
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD
    # Arm translation (m) per frame along the motion axis, when known.
    arm_position: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not self.sample_rate > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.contact_threshold < 0:
            raise ValueError(f"contact threshold must be >= 0, got {self.contact_threshold}")
        if frames:
            shape = frames[0].forces.shape
            for index, frame in enumerate(frames):
                if frame.forces.shape != shape:
                    raise ValueError(
                        f"frame {index} has shape {frame.forces.shape}, expected {shape}"
                    )
        if self.arm_position is not None:
            arm = np.array(self.arm_position, dtype=float)
            if arm.shape != (len(frames),):
                raise ValueError(
                    f"arm position has {arm.shape} samples, expected ({len(frames)},)"
                )
            object.__setattr__(self, "arm_position", _frozen(arm))

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def rows(self) -> int:
        return self.frames[0].rows

    @property
    def cols(self) -> int:
        return self.frames[0].cols

    @property
    def taxel_pitch(self) -> float:
        return self.frames[0].taxel_pitch

    def stacked(self) -> np.ndarray:
        """All frames as a (T, rows, cols) array."""
        return np.stack([frame.forces for frame in self.frames])

    def pool(self, factor: PoolFactor) -> "TaxelTrial":
        """Pool every frame; labels and arm positions carry over.

        A pooled taxel sums the noise of every taxel it covers, so the contact
        threshold grows with the square root of the number of merged taxels.
        """
        frames = tuple(pool_frame(frame, factor) for frame in self.frames)
        if not frames:
            return self
        merged = (self.rows * self.cols) // (frames[0].rows * frames[0].cols)
        return replace(
            self, frames=frames, contact_threshold=self.contact_threshold * math.sqrt(merged)
        )


@dataclass(frozen=True)
class BinaryMask:
    """Taxels in contact after thresholding."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits))

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Component:
    """A maximal connected set of contact taxels."""

    taxel_indices: frozenset
    area: int
    centroid: Tuple[float, float]

    @classmethod
    def from_indices(cls, indices: Sequence[Tuple[int, int]]) -> "Component":
        members = frozenset((int(r), int(c)) for r, c in indices)
        if not members:
            raise ValueError("a component needs at least one taxel")
        coords = np.array(sorted(members), dtype=float)
        centroid = (float(coords[:, 0].mean()), float(coords[:, 1].mean()))
        return cls(members, len(members), centroid)

    @property
    def min_index(self) -> Tuple[int, int]:
        return min(self.taxel_indices)

    def rows_cols(self) -> Tuple[np.ndarray, np.ndarray]:
        """Member coordinates as index arrays usable on a force grid."""
        coords = np.array(sorted(self.taxel_indices))
        return coords[:, 0], coords[:, 1]


def threshold_frame(frame: TaxelFrame, tau: float) -> BinaryMask:
    """Mark taxels whose force strictly exceeds tau."""
    if tau < 0:
        raise ValueError(f"threshold must be >= 0, got {tau}")
    return BinaryMask(frame.forces > tau)


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def connected_components(mask: BinaryMask, connectivity: int = 4) -> List[Component]:
    """Segment a mask into maximal connected regions.

    Returns:
        Components sorted by area (largest first); equal areas are ordered by
        their smallest (row, col) member.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = ndimage.label(mask.bits, structure=_STRUCTURES[connectivity])
    components = []
    for label in range(1, count + 1):
        # argwhere is row-major, so members come out sorted
        components.append(Component.from_indices(np.argwhere(labels == label)))
    components.sort(key=lambda comp: (-comp.area, comp.min_index))
    return components


def largest_component(components: Sequence[Component]) -> Optional[Component]:
    """First element of a sorted component list, or None when there is no contact."""
    return components[0] if components else None


def pool_frame(frame: TaxelFrame, factor: PoolFactor) -> TaxelFrame:
    """Sum factor x factor blocks of taxels into one coarser taxel.

    ``factor`` may be ``"full"`` to collapse the entire grid into a single
    taxel whose area equals the whole sensor surface.
    """
    rows, cols = frame.rows, frame.cols
    if factor == POOL_FULL:
        pitch = frame.taxel_pitch * math.sqrt(rows * cols)
        return TaxelFrame(np.array([[frame.forces.sum()]]), pitch)
    if not isinstance(factor, int) or isinstance(factor, bool) or factor < 1:
        raise ValueError(f"pooling factor must be a positive integer or '{POOL_FULL}'")
    if rows % factor or cols % factor:
        raise NonDivisibleGrid(f"{rows}x{cols} grid is not divisible by pooling factor {factor}")
    pooled = frame.forces.reshape(rows // factor, factor, cols // factor, factor).sum(axis=(1, 3))
    return TaxelFrame(pooled, frame.taxel_pitch * factor)


def parse_pool_factor(text: Union[str, int]) -> PoolFactor:
    """Parse a pooling factor from configuration ("2", 4, "full")."""
    if isinstance(text, int) and not isinstance(text, bool):
        return text
    token = str(text).strip().lower()
    if token == POOL_FULL:
        return POOL_FULL
    return int(token)
