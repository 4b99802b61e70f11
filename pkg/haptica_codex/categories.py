"""
Object categories, feature sets and robot conditions.
"""

import enum
from dataclasses import dataclass
from typing import Optional


class Category(enum.Enum):
    """Object category: {Rigid, Soft} x {Fixed, Movable}.

    Declaration order is the fixed tie-break order RF < RM < SF < SM.
    """
    RF = "RF"
    RM = "RM"
    SF = "SF"
    SM = "SM"

    @property
    def rigid(self) -> bool:
        return self in (Category.RF, Category.RM)

    @property
    def fixed(self) -> bool:
        return self in (Category.RF, Category.SF)

    @property
    def order(self) -> int:
        return CATEGORY_ORDER.index(self)


CATEGORY_ORDER = tuple(Category)

UNKNOWN_LABEL = "unknown"


def parse_label(text: str) -> Optional[Category]:
    """Parse a label token from a trial or manifest file."""
    text = text.strip()
    if text == UNKNOWN_LABEL or text == "":
        return None
    try:
        return Category(text)
    except ValueError:
        raise ValueError(f"unknown label '{text}'") from None


def format_label(label: Optional[Category]) -> str:
    return label.value if label is not None else UNKNOWN_LABEL


class FeatureSet(enum.Enum):
    """Observation set an HMM is trained on."""
    FORCE = "force"
    AREA = "area"
    FORCE_MOTION = "force+motion"

    @property
    def dim(self) -> int:
        return 2 if self is FeatureSet.FORCE_MOTION else 1


@dataclass(frozen=True)
class Condition:
    """Robot setting a trial was recorded (or simulated) under."""

    velocity: str = "nominal"
    stiffness: str = "nominal"

    def __str__(self) -> str:
        return f"{self.velocity}-velocity-{self.stiffness}-stiffness"
