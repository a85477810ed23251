"""Vertebra label indexing: names, regions, and labeled predictions.

Labels are 1-based: 1..7 cervical (C1..C7), 8..19 thoracic (T1..T12),
20..24 lumbar (L1..L5), 25..26 sacral (S1..S2). Index increases caudally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

V_MAX = 26

LABEL_NAMES = tuple(
    [f"C{i}" for i in range(1, 8)]
    + [f"T{i}" for i in range(1, 13)]
    + [f"L{i}" for i in range(1, 6)]
    + ["S1", "S2"]
)

_NAME_TO_LABEL = {name: i + 1 for i, name in enumerate(LABEL_NAMES)}

REGIONS = {
    "cervical": range(1, 8),
    "thoracic": range(8, 20),
    "lumbar": range(20, 25),
    "sacrum": range(25, 27),
}


def label_name(label: int) -> str:
    """Anatomical name for a 1-based label index (e.g. 8 -> 'T1')."""
    if not 1 <= label <= V_MAX:
        raise ValueError(f"label {label} outside [1, {V_MAX}]")
    return LABEL_NAMES[label - 1]


def label_index(name: str) -> int:
    """1-based label index for an anatomical name (e.g. 'T1' -> 8)."""
    try:
        return _NAME_TO_LABEL[name.upper()]
    except KeyError:
        raise ValueError(f"unknown vertebra name {name!r}") from None


def region_of(label: int) -> str:
    """Spine region ('cervical'/'thoracic'/'lumbar'/'sacrum') of a label."""
    for region, labels in REGIONS.items():
        if label in labels:
            return region
    raise ValueError(f"label {label} outside [1, {V_MAX}]")


def default_anchor_labels(v_max: int = V_MAX) -> frozenset[int]:
    """Anchor labels: the two vertebrae at each end of the label range.

    For the full 26-label spine these are C1, C2, S1, S2.
    """
    if v_max < 1:
        raise ValueError("v_max must be >= 1")
    return frozenset({1, 2, v_max - 1, v_max} & set(range(1, v_max + 1)))


@dataclass(frozen=True)
class VertebraPrediction:
    """A labeled vertebra center in world mm coordinates.

    ``activation`` carries the detector evidence for the prediction (peak map
    value for 3-D decoding, interpolated 1-D signal value otherwise).
    """

    label: int
    center: np.ndarray  # world mm, shape (3,)
    activation: float = 0.0

    def __post_init__(self):
        if not 1 <= self.label <= V_MAX:
            raise ValueError(f"label {self.label} outside [1, {V_MAX}]")
        object.__setattr__(
            self, "center", np.asarray(self.center, dtype=np.float64).reshape(3)
        )

    @property
    def name(self) -> str:
        return label_name(self.label)
