"""Axis-aligned 3-D scalar grids in physical coordinates and their file format.

A grid lives on world coordinates ``world = origin + index * spacing`` (mm),
with data indexed ``[x, y, z]``. Activation stacks bundle one grid per
vertebra label, all sharing the same geometry.

On disk a grid is a "VGF1" file: magic ``VGF1``, little-endian u32 dims
(W, H, L), f64 spacing xyz, f64 origin xyz, then W*H*L little-endian f32
values in x-fastest order. A stack is a directory of ``channel_NN.vgf``
files plus a ``stack.json`` manifest.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .labels import LABEL_NAMES, V_MAX, label_name

VGF_MAGIC = b"VGF1"
_HEADER = struct.Struct("<III3d3d")


class VgfError(Exception):
    """Base class for VGF parse/serialize failures."""


class VgfHeaderError(VgfError):
    """Missing magic bytes or malformed/implausible header fields."""


class VgfPayloadError(VgfError):
    """Payload length does not match the header dims."""


class VgfDataError(VgfError):
    """Payload contains non-finite values."""


@dataclass(frozen=True)
class GridGeometry:
    """Dims (voxels), spacing (mm/voxel) and origin (mm) of an axis-aligned grid."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or len(spacing) != 3 or len(origin) != 3:
            raise ValueError("dims, spacing and origin must be length-3")
        if any(d < 1 for d in dims):
            raise ValueError(f"dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive and finite, got {spacing}")
        if any(not np.isfinite(o) for o in origin):
            raise ValueError(f"origin must be finite, got {origin}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims

    def voxel_to_world(self, idx) -> np.ndarray:
        """World mm coordinates of voxel indices, shape (..., 3)."""
        idx = np.asarray(idx, dtype=np.float64)
        return np.asarray(self.origin) + idx * np.asarray(self.spacing)

    def world_to_voxel(self, pts) -> np.ndarray:
        """Continuous voxel coordinates of world points, shape (..., 3)."""
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - np.asarray(self.origin)) / np.asarray(self.spacing)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """World bounding box spanned by the voxel centers (lo, hi)."""
        lo = np.asarray(self.origin, dtype=np.float64)
        hi = lo + (np.asarray(self.dims) - 1) * np.asarray(self.spacing)
        return lo, hi


@dataclass(frozen=True)
class VolumeGrid:
    """Dense scalar field on a GridGeometry; data indexed [x, y, z] as float64.

    Immutable after construction; all operations on it are pure.
    """

    geometry: GridGeometry
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != self.geometry.dims:
            raise ValueError(
                f"data shape {data.shape} does not match dims {self.geometry.dims}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("grid data must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "VolumeGrid":
        return cls(geometry, np.zeros(geometry.dims, dtype=np.float64))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.geometry.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.geometry.spacing

    @property
    def origin(self) -> tuple[float, float, float]:
        return self.geometry.origin


def trilinear_sample(grid: VolumeGrid, points) -> np.ndarray | float:
    """Trilinear interpolation of the grid at world points (mm).

    Points outside the voxel-center bounding box evaluate to 0 (activation
    maps are zero away from the spine, so zero is the physical extension).

    Parameters
    ----------
    grid : VolumeGrid
    points : array_like
        One point, shape (3,), or a batch, shape (..., 3).

    Returns
    -------
    float or np.ndarray
        Scalar for a single point, array of shape (...) for a batch.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if pts.shape[-1] != 3:
        raise ValueError("points must have a trailing dimension of 3")
    if not np.all(np.isfinite(pts)):
        raise ValueError("sample points must be finite")
    vox = grid.geometry.world_to_voxel(pts).reshape(-1, 3)
    out = _trilinear_at_voxels(grid.data, vox)
    if single:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def _trilinear_at_voxels(data: np.ndarray, vox: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at continuous voxel coords (N, 3); 0 outside."""
    dims = np.asarray(data.shape)
    inside = np.all((vox >= 0.0) & (vox <= dims - 1), axis=1)
    # Clamp the base corner so x0+1 stays valid for points on the upper face.
    base = np.floor(vox).astype(np.intp)
    base = np.minimum(np.maximum(base, 0), np.maximum(dims - 2, 0))
    frac = vox - base
    frac = np.clip(frac, 0.0, 1.0)

    x0, y0, z0 = base[:, 0], base[:, 1], base[:, 2]
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    # Degenerate axes (dim == 1): collapse to the single plane.
    for axis, f in zip(range(3), (fx, fy, fz)):
        if data.shape[axis] == 1:
            f[:] = 0.0
    x1 = np.minimum(x0 + 1, dims[0] - 1)
    y1 = np.minimum(y0 + 1, dims[1] - 1)
    z1 = np.minimum(z0 + 1, dims[2] - 1)

    c000 = data[x0, y0, z0]
    c100 = data[x1, y0, z0]
    c010 = data[x0, y1, z0]
    c110 = data[x1, y1, z0]
    c001 = data[x0, y0, z1]
    c101 = data[x1, y0, z1]
    c011 = data[x0, y1, z1]
    c111 = data[x1, y1, z1]

    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    out[~inside] = 0.0
    return out


@dataclass(frozen=True)
class ActivationStack:
    """Ordered per-label activation grids sharing one geometry.

    Channel ``v`` (1-based) is ``channels[v-1]`` and maps to anatomical label
    ``v`` (C1..S2 for v_max=26). Immutable; safe to share across threads.
    """

    channels: tuple[VolumeGrid, ...]
    v_max: int = V_MAX

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(channels) != self.v_max:
            raise ValueError(
                f"expected {self.v_max} channels, got {len(channels)}"
            )
        geom = channels[0].geometry
        for i, ch in enumerate(channels):
            if ch.geometry != geom:
                raise ValueError(f"channel {i + 1} geometry differs from channel 1")
        object.__setattr__(self, "channels", channels)

    @property
    def geometry(self) -> GridGeometry:
        return self.channels[0].geometry

    def channel(self, label: int) -> VolumeGrid:
        """Grid for 1-based label index."""
        if not 1 <= label <= self.v_max:
            raise ValueError(f"label {label} outside [1, {self.v_max}]")
        return self.channels[label - 1]

    @classmethod
    def from_arrays(
        cls, geometry: GridGeometry, arrays, v_max: int = V_MAX
    ) -> "ActivationStack":
        return cls(tuple(VolumeGrid(geometry, a) for a in arrays), v_max=v_max)


def combine_channels(stack: ActivationStack) -> VolumeGrid:
    """Voxelwise sum of all channels: activation of *any* vertebra center."""
    total = np.zeros(stack.geometry.dims, dtype=np.float64)
    for ch in stack.channels:
        total += ch.data
    return VolumeGrid(stack.geometry, total)


def write_volume(grid: VolumeGrid, path) -> None:
    """Write a grid as a VGF1 file (f32 payload, x-fastest order)."""
    path = Path(path)
    w, h, l = grid.dims
    header = _HEADER.pack(w, h, l, *grid.spacing, *grid.origin)
    payload = np.ascontiguousarray(
        grid.data.ravel(order="F"), dtype="<f4"
    ).tobytes()
    path.write_bytes(VGF_MAGIC + header + payload)


def read_volume(path) -> VolumeGrid:
    """Read a VGF1 file back into a grid.

    Raises
    ------
    VgfHeaderError, VgfPayloadError, VgfDataError
        On missing magic / malformed header, payload size mismatch, and
        non-finite payload values respectively.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != VGF_MAGIC:
        raise VgfHeaderError(f"{path}: missing VGF1 magic bytes")
    if len(raw) < 4 + _HEADER.size:
        raise VgfHeaderError(f"{path}: truncated header")
    w, h, l, sx, sy, sz, ox, oy, oz = _HEADER.unpack_from(raw, 4)
    try:
        geom = GridGeometry((w, h, l), (sx, sy, sz), (ox, oy, oz))
    except ValueError as exc:
        raise VgfHeaderError(f"{path}: {exc}") from exc
    payload = raw[4 + _HEADER.size :]
    expected = w * h * l * 4
    if len(payload) != expected:
        raise VgfPayloadError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise VgfDataError(f"{path}: payload contains non-finite values")
    data = values.reshape((w, h, l), order="F")
    return VolumeGrid(geom, data)


def _channel_filename(label: int) -> str:
    return f"channel_{label:02d}.vgf"


def write_stack(stack: ActivationStack, directory) -> None:
    """Write a stack as a directory of VGF files plus stack.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for v in range(1, stack.v_max + 1):
        write_volume(stack.channel(v), directory / _channel_filename(v))
    manifest = {
        "v_max": stack.v_max,
        "labels": [
            label_name(v) if stack.v_max == V_MAX else str(v)
            for v in range(1, stack.v_max + 1)
        ],
    }
    (directory / "stack.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def read_stack(directory) -> ActivationStack:
    """Read a stack directory written by write_stack."""
    directory = Path(directory)
    manifest_path = directory / "stack.json"
    if not manifest_path.is_file():
        raise VgfHeaderError(f"{directory}: missing stack.json")
    manifest = json.loads(manifest_path.read_text())
    v_max = int(manifest["v_max"])
    channels = tuple(
        read_volume(directory / _channel_filename(v)) for v in range(1, v_max + 1)
    )
    return ActivationStack(channels, v_max=v_max)


__all__ = [
    "GridGeometry",
    "VolumeGrid",
    "ActivationStack",
    "trilinear_sample",
    "combine_channels",
    "read_volume",
    "write_volume",
    "read_stack",
    "write_stack",
    "VgfError",
    "VgfHeaderError",
    "VgfPayloadError",
    "VgfDataError",
]
