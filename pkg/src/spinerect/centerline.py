"""Spine centerline extraction, arc-length resampling, and moving frames.

The centerline is traced from the combined activation map as per-slice mass
centers, smoothed, resampled to uniform arc length, and equipped with a
right-handed orthonormal frame <e1, e2, e3> at every sample: e3 the unit
tangent (pointing along increasing image z), e2 the normal-plane direction
closest to the image y axis, e1 = e2 x e3.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import VolumeGrid

# Tangents closer than this to the y axis make the min-angle rule for e2
# degenerate; fall back to parallel transport. cos(89 deg) on the projection
# norm corresponds to a <1 degree angle between tangent and +/-y.
_DEGENERATE_SIN = np.sin(np.deg2rad(1.0))


class CenterlineUndefinedError(Exception):
    """Fewer than 2 axial slices carry supra-threshold activation."""


@dataclass(frozen=True)
class Centerline:
    """Arc-length parameterized curve with optional per-sample frames.

    ``t`` is uniform with spacing ``step`` and starts at 0; ``points`` are
    world mm. Frame arrays are None until compute_frames has run.
    """

    t: np.ndarray
    points: np.ndarray
    step: float
    e1: np.ndarray | None = None
    e2: np.ndarray | None = None
    e3: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] != t.shape[0]:
            raise ValueError("points must be (n, 3) matching t")
        if t.shape[0] < 2:
            raise ValueError("centerline needs at least 2 samples")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def has_frames(self) -> bool:
        return self.e1 is not None

    @property
    def length_mm(self) -> float:
        return float(self.t[-1])


def trace_centerline(g_hat: VolumeGrid, threshold: float = 0.5) -> np.ndarray:
    """Trace per-axial-slice mass centers of supra-threshold activation.

    For every z slice holding at least one voxel with activation above
    ``threshold``, emits the mean world coordinate of those voxels; slices
    with no supra-threshold voxel are skipped (the polyline bridges the gap
    directly). Output is ordered by z, shape (n, 3).

    Raises CenterlineUndefinedError when fewer than 2 slices contribute.
    """
    if not np.isfinite(threshold) or threshold <= 0:
        raise ValueError(f"threshold must be positive and finite, got {threshold}")
    origin = np.asarray(g_hat.origin)
    spacing = np.asarray(g_hat.spacing)
    points = []
    for z in range(g_hat.dims[2]):
        xs, ys = np.nonzero(g_hat.data[:, :, z] > threshold)
        if xs.size == 0:
            continue
        center_vox = np.array([xs.mean(), ys.mean(), float(z)])
        points.append(origin + center_vox * spacing)
    if len(points) < 2:
        raise CenterlineUndefinedError(
            f"only {len(points)} slices exceed threshold {threshold}; "
            "centerline undefined"
        )
    return np.asarray(points)


def _moving_average(points: np.ndarray, window: int) -> np.ndarray:
    """Symmetric moving average with a window that shrinks near the ends.

    The first and last points are averaged over a width-1 window, so curve
    endpoints are preserved exactly.
    """
    if window <= 1:
        return points.copy()
    half = window // 2
    n = points.shape[0]
    out = np.empty_like(points)
    cumsum = np.vstack([np.zeros(3), np.cumsum(points, axis=0)])
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = (cumsum[i + h + 1] - cumsum[i - h]) / (2 * h + 1)
    return out


def resample_and_smooth(
    polyline: np.ndarray, step: float = 1.0, smooth_window: int = 11
) -> Centerline:
    """Smooth a polyline and resample it to uniform arc-length spacing.

    Both endpoints are kept: the sample count is round(total/step) + 1, so
    the realized spacing can differ slightly from the request. t is the
    arc-length parameterization of the *output* polyline (its total equals
    the chord-length sum of the returned samples); it is uniform with the
    realized spacing, which is stored in Centerline.step. Frames are left
    unset.
    """
    polyline = np.asarray(polyline, dtype=np.float64)
    if polyline.ndim != 2 or polyline.shape[1] != 3 or polyline.shape[0] < 2:
        raise ValueError("polyline must be (n >= 2, 3)")
    if step <= 0:
        raise ValueError("step must be > 0")
    smoothed = _moving_average(polyline, smooth_window)
    seg = np.linalg.norm(np.diff(smoothed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 0:
        raise ValueError("polyline has zero length after smoothing")
    n_out = max(2, int(round(total / step)) + 1)
    arc_targets = np.linspace(0.0, total, n_out)
    pts = np.column_stack(
        [np.interp(arc_targets, s, smoothed[:, dim]) for dim in range(3)]
    )
    # Parameterize by the output polyline itself: downstream consumers
    # interpolate linearly between samples, so chord length is the exact
    # arc length of the curve they see.
    chord_total = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    actual_step = chord_total / (n_out - 1)
    return Centerline(
        t=np.linspace(0.0, chord_total, n_out), points=pts, step=actual_step
    )


def compute_frames(c: Centerline) -> Centerline:
    """Attach the moving local frame <e1, e2, e3> to every sample.

    e3: normalized central-difference tangent (one-sided at the ends),
    sign-fixed along increasing image z. e2: unit projection of the image
    y axis onto the plane normal to e3 (the normal-plane direction with
    minimum angle to y); when the tangent is within 1 degree of +/-y the
    previous sample's e2 is parallel-transported instead (x axis projection
    for the first sample). e1 = e2 x e3.
    """
    pts = c.points
    n = len(c)
    tangents = np.empty_like(pts)
    tangents[0] = pts[1] - pts[0]
    tangents[-1] = pts[-1] - pts[-2]
    if n > 2:
        tangents[1:-1] = pts[2:] - pts[:-2]
    norms = np.linalg.norm(tangents, axis=1, keepdims=True)
    if np.any(norms <= 0):
        raise ValueError("degenerate tangent (repeated centerline points)")
    e3 = tangents / norms
    flip = e3[:, 2] < 0
    e3[flip] *= -1.0

    y_axis = np.array([0.0, 1.0, 0.0])
    x_axis = np.array([1.0, 0.0, 0.0])
    e2 = np.empty_like(e3)
    for i in range(n):
        proj = y_axis - np.dot(y_axis, e3[i]) * e3[i]
        norm = np.linalg.norm(proj)
        if norm < _DEGENERATE_SIN:
            if i == 0:
                proj = x_axis - np.dot(x_axis, e3[i]) * e3[i]
            else:
                prev = e2[i - 1]
                proj = prev - np.dot(prev, e3[i]) * e3[i]
            norm = np.linalg.norm(proj)
            if norm <= 0:
                raise ValueError("cannot construct frame: degenerate geometry")
        e2[i] = proj / norm
    e1 = np.cross(e2, e3)
    return Centerline(t=c.t, points=pts, step=c.step, e1=e1, e2=e2, e3=e3)


def centerline_csv(c: Centerline) -> str:
    """Debug dump: one row per sample with t, point, and frame vectors."""
    header = (
        "t,px,py,pz,e1x,e1y,e1z,e2x,e2y,e2z,e3x,e3y,e3z"
        if c.has_frames
        else "t,px,py,pz"
    )
    rows = [header]
    for i in range(len(c)):
        cols = [c.t[i], *c.points[i]]
        if c.has_frames:
            cols += [*c.e1[i], *c.e2[i], *c.e3[i]]
        rows.append(",".join(f"{v:.6g}" for v in cols))
    return "\n".join(rows) + "\n"


__all__ = [
    "Centerline",
    "CenterlineUndefinedError",
    "trace_centerline",
    "resample_and_smooth",
    "compute_frames",
    "centerline_csv",
]
