"""Gaussian activation-map rendering from vertebra center annotations.

Stands in for the upstream keypoint model: each annotated label gets a
unit-peak isotropic Gaussian (sigma in mm) around its center, truncated at
3 sigma. Used by the phantom generator and by tests.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labels import V_MAX, label_index, label_name
from .volume import ActivationStack, GridGeometry, VolumeGrid

TRUNCATION_SIGMAS = 3.0


@dataclass(frozen=True)
class VertebraAnnotation:
    """Ground-truth vertebra center: 1-based label and world mm coordinates."""

    label: int
    center: np.ndarray

    def __post_init__(self):
        if not 1 <= self.label <= V_MAX:
            raise ValueError(f"label {self.label} outside [1, {V_MAX}]")
        object.__setattr__(
            self, "center", np.asarray(self.center, dtype=np.float64).reshape(3)
        )

    @property
    def name(self) -> str:
        return label_name(self.label)


def validate_annotations(annotations: list[VertebraAnnotation]) -> None:
    """Check label uniqueness and consecutiveness (anatomical plausibility)."""
    labels = sorted(a.label for a in annotations)
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate labels in annotations: {labels}")
    if labels and labels != list(range(labels[0], labels[-1] + 1)):
        raise ValueError(f"annotation labels not a consecutive run: {labels}")


def render_gaussian_channel(
    geometry: GridGeometry,
    centers_mm,
    amplitudes=None,
    sigma_mm: float = 8.0,
) -> np.ndarray:
    """Render one channel: max of truncated Gaussians at the given centers.

    Returns a dense float64 array of the geometry's shape. Blobs are exact
    zeros beyond 3 sigma. Overlapping blobs combine by maximum so the peak
    value stays the blob amplitude.
    """
    if sigma_mm <= 0:
        raise ValueError("sigma_mm must be > 0")
    centers = np.atleast_2d(np.asarray(centers_mm, dtype=np.float64))
    if amplitudes is None:
        amplitudes = np.ones(len(centers))
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    data = np.zeros(geometry.dims, dtype=np.float64)
    spacing = np.asarray(geometry.spacing)
    origin = np.asarray(geometry.origin)
    dims = np.asarray(geometry.dims)
    radius = TRUNCATION_SIGMAS * sigma_mm
    for center, amp in zip(centers, amplitudes):
        if amp == 0.0:
            continue
        lo = np.ceil((center - radius - origin) / spacing).astype(int)
        hi = np.floor((center + radius - origin) / spacing).astype(int)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, dims - 1)
        if np.any(lo > hi):
            continue
        xs = origin[0] + np.arange(lo[0], hi[0] + 1) * spacing[0]
        ys = origin[1] + np.arange(lo[1], hi[1] + 1) * spacing[1]
        zs = origin[2] + np.arange(lo[2], hi[2] + 1) * spacing[2]
        d2 = (
            ((xs - center[0]) ** 2)[:, None, None]
            + ((ys - center[1]) ** 2)[None, :, None]
            + ((zs - center[2]) ** 2)[None, None, :]
        )
        blob = amp * np.exp(-d2 / (2.0 * sigma_mm**2))
        blob[d2 > radius**2] = 0.0
        region = data[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1]
        np.maximum(region, blob, out=region)
    return data


def render_gaussians(
    annotations: list[VertebraAnnotation],
    geometry: GridGeometry,
    sigma_mm: float = 8.0,
    v_max: int = V_MAX,
) -> ActivationStack:
    """Render ground-truth activation maps, one channel per label.

    Channel v holds exp(-||p - c_v||^2 / (2 sigma^2)) at voxel centers when
    label v is annotated, zeros otherwise. An annotation outside the grid's
    bounding box triggers a warning and renders whatever tail intersects the
    grid.
    """
    validate_annotations(annotations)
    lo, hi = geometry.bounds()
    arrays = [np.zeros(geometry.dims, dtype=np.float64) for _ in range(v_max)]
    for ann in annotations:
        if ann.label > v_max:
            raise ValueError(f"label {ann.label} exceeds v_max={v_max}")
        if np.any(ann.center < lo) or np.any(ann.center > hi):
            warnings.warn(
                f"annotation {ann.name} at {ann.center.tolist()} lies outside "
                "the grid bounding box; rendering truncated tail",
                stacklevel=2,
            )
        arrays[ann.label - 1] = render_gaussian_channel(
            geometry, [ann.center], sigma_mm=sigma_mm
        )
    return ActivationStack.from_arrays(geometry, arrays, v_max=v_max)


def write_annotations(annotations: list[VertebraAnnotation], path) -> None:
    """Write annotations as the JSON list format used across the toolchain."""
    records = [
        {
            "label": a.label,
            "label_name": a.name,
            "x_mm": float(a.center[0]),
            "y_mm": float(a.center[1]),
            "z_mm": float(a.center[2]),
        }
        for a in sorted(annotations, key=lambda a: a.label)
    ]
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def read_annotations(path) -> list[VertebraAnnotation]:
    records = json.loads(Path(path).read_text())
    annotations = []
    for rec in records:
        label = int(rec["label"]) if "label" in rec else label_index(rec["label_name"])
        annotations.append(
            VertebraAnnotation(label, [rec["x_mm"], rec["y_mm"], rec["z_mm"]])
        )
    return annotations


__all__ = [
    "VertebraAnnotation",
    "validate_annotations",
    "render_gaussian_channel",
    "render_gaussians",
    "read_annotations",
    "write_annotations",
]
