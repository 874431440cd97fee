"""Voxel-wise fusion of aligned ray-density grids across cameras and time.

All six fusion functions are power-type means with streaming sufficient
statistics (sum, reciprocal sum, log sum, square sum, running min/max), so
fusing m grids costs one pass over each input and O(1) extra grids of memory.
The harmonic mean of any set containing a zero is zero: a voxel must be
supported by every input to survive, which is what suppresses single-view
outliers.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import AlignmentError, ConfigurationError
from .events import EventStream, Packet, crop_time
from .dsi import DsiGrid, new_grid, sweep_events, SweepStats
from .geometry import CameraModel, ReferenceView, Trajectory

logger = logging.getLogger(__name__)


class FusionFunction(Enum):
    MIN = "min"
    HARMONIC = "H"
    GEOMETRIC = "G"
    ARITHMETIC = "A"
    RMS = "RMS"
    MAX = "max"


_TOKEN_TO_FN = {
    "min": FusionFunction.MIN,
    "h": FusionFunction.HARMONIC,
    "g": FusionFunction.GEOMETRIC,
    "a": FusionFunction.ARITHMETIC,
    "rms": FusionFunction.RMS,
    "max": FusionFunction.MAX,
}


class _Accumulator:
    """Streaming n-ary mean over equal-shape arrays."""

    def __init__(self, fn: FusionFunction):
        self.fn = fn
        self.n = 0
        self.state = None
        self.first = None

    def add(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=np.float64)
        self.n += 1
        if self.n == 1:
            self.first = values
        if self.fn is FusionFunction.ARITHMETIC:
            upd = v
        elif self.fn is FusionFunction.RMS:
            upd = v * v
        elif self.fn is FusionFunction.HARMONIC:
            with np.errstate(divide="ignore"):
                upd = 1.0 / v
        elif self.fn is FusionFunction.GEOMETRIC:
            with np.errstate(divide="ignore"):
                upd = np.log(v)
        else:
            upd = v
        if self.state is None:
            self.state = upd.copy() if upd is v else upd
        elif self.fn is FusionFunction.MIN:
            np.minimum(self.state, upd, out=self.state)
        elif self.fn is FusionFunction.MAX:
            np.maximum(self.state, upd, out=self.state)
        else:
            self.state += upd

    def result(self) -> np.ndarray:
        if self.n == 0:
            raise ConfigurationError("nothing was fused")
        if self.n == 1:
            # Exact identity for a single input, regardless of function.
            return np.asarray(self.first, dtype=np.float64).copy()
        if self.fn is FusionFunction.ARITHMETIC:
            return self.state / self.n
        if self.fn is FusionFunction.RMS:
            return np.sqrt(self.state / self.n)
        if self.fn is FusionFunction.HARMONIC:
            with np.errstate(divide="ignore"):
                out = self.n / self.state
            return np.where(np.isfinite(out), out, 0.0)
        if self.fn is FusionFunction.GEOMETRIC:
            with np.errstate(over="ignore"):
                return np.exp(self.state / self.n)
        return self.state.astype(np.float64, copy=True)


def fuse_value(fn: FusionFunction, values) -> float:
    """n-ary mean of non-negative scalars; n=1 returns the input unchanged."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ConfigurationError("fuse_value needs at least one value")
    if np.any(v < 0):
        raise ValueError("fusion inputs must be non-negative")
    acc = _Accumulator(fn)
    for x in v:
        acc.add(np.asarray(x))
    return float(acc.result())


def fuse_arrays(fn: FusionFunction, arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise n-ary mean over a sequence of equal-shape arrays (float64)."""
    acc = _Accumulator(fn)
    for a in arrays:
        acc.add(a)
    return acc.result()


def fuse_grids(fn: FusionFunction, grids: Sequence[DsiGrid]) -> DsiGrid:
    """Voxel-wise fusion of aligned grids; metadata comes from the first grid.

    Raises:
        AlignmentError: grids differ in raster, depth sampling, or reference
            pose. Fusion never resamples; inputs must share one reference view.
    """
    grids = list(grids)
    if not grids:
        raise ConfigurationError("fuse_grids needs at least one grid")
    for g in grids[1:]:
        if not grids[0].aligned_with(g):
            raise AlignmentError("grids to fuse must share reference view, raster, and depth sampling")
    fused = fuse_arrays(fn, [g.values for g in grids]).astype(np.float32)
    out = grids[0].copy_empty()
    out.values = fused
    for g in grids:
        out.stats.merge(g.stats)
    return out


@dataclass
class FusionScheme:
    """Two-axis fusion recipe.

    order "camera_first" fuses across cameras within each time sub-interval and
    then across sub-intervals; "time_first" transposes. With n_s=1 the time
    function is a documented no-op. Shuffle permutes which sub-interval of each
    non-reference camera is paired with the reference camera's sub-interval
    before camera-axis fusion; it only has an effect in camera_first order.
    """

    camera_fn: FusionFunction = FusionFunction.HARMONIC
    time_fn: FusionFunction = FusionFunction.ARITHMETIC
    order: str = "time_first"
    n_s: int = 1
    split: str = "equal_count"
    shuffle: str = "off"

    def __post_init__(self):
        if self.order not in ("camera_first", "time_first"):
            raise ConfigurationError(f"unknown fusion order {self.order!r}")
        if self.n_s < 1:
            raise ConfigurationError(f"n_s must be >= 1, got {self.n_s}")
        if self.split not in ("equal_time", "equal_count"):
            raise ConfigurationError(f"unknown split mode {self.split!r}")
        if self.shuffle != "off" and self.shuffle != "cyclic" and not re.fullmatch(r"seed:\d+", self.shuffle):
            raise ConfigurationError(f"shuffle must be 'off', 'cyclic', or 'seed:<int>', got {self.shuffle!r}")


_TOKEN_RE = re.compile(r"^(min|max|rms|a|g|h)(c|t)$", re.IGNORECASE)


def parse_scheme(
    text: str, n_s: int = 1, split: str = "equal_count", shuffle: str = "off"
) -> FusionScheme:
    """Parse scheme strings like "Hc*At" (harmonic over cameras of arithmetic over time).

    The token right of "*" is applied first; "Hc*At" therefore fuses each
    camera's sub-intervals arithmetically, then the cameras harmonically.
    A single token fixes that axis's function and leaves the other at the
    arithmetic default.
    """
    tokens = [t for t in text.split("*") if t]
    if not 1 <= len(tokens) <= 2:
        raise ConfigurationError(f"scheme must be 1 or 2 '*'-separated tokens, got {text!r}")
    parsed = []
    for tok in tokens:
        m = _TOKEN_RE.match(tok.strip())
        if not m:
            raise ConfigurationError(
                f"bad scheme token {tok!r}; expected one of min/H/G/A/RMS/max plus axis c or t"
            )
        parsed.append((_TOKEN_TO_FN[m.group(1).lower()], m.group(2).lower()))
    if len(parsed) == 1:
        fn, axis = parsed[0]
        if axis == "c":
            return FusionScheme(camera_fn=fn, n_s=n_s, split=split, shuffle=shuffle, order="time_first")
        return FusionScheme(time_fn=fn, n_s=n_s, split=split, shuffle=shuffle, order="camera_first")
    (outer_fn, outer_axis), (inner_fn, inner_axis) = parsed
    if {outer_axis, inner_axis} != {"c", "t"}:
        raise ConfigurationError(f"scheme {text!r} must name both axes, one 'c' and one 't'")
    if inner_axis == "c":
        return FusionScheme(
            camera_fn=inner_fn, time_fn=outer_fn, order="camera_first",
            n_s=n_s, split=split, shuffle=shuffle,
        )
    return FusionScheme(
        camera_fn=outer_fn, time_fn=inner_fn, order="time_first",
        n_s=n_s, split=split, shuffle=shuffle,
    )


def scheme_to_string(scheme: FusionScheme) -> str:
    c = scheme.camera_fn.value + "c"
    t = scheme.time_fn.value + "t"
    return f"{t}*{c}" if scheme.order == "camera_first" else f"{c}*{t}"


def shuffle_pairing(n_s: int, mode: str) -> np.ndarray:
    """Permutation of sub-interval indices for non-reference cameras.

    "cyclic" returns (i+1) mod n_s; "seed:<int>" a reproducible uniform
    permutation.
    """
    if n_s < 2:
        raise ConfigurationError("shuffling needs at least 2 sub-intervals")
    if mode == "cyclic":
        return (np.arange(n_s) + 1) % n_s
    m = re.fullmatch(r"seed:(\d+)", mode)
    if m:
        return np.random.default_rng(int(m.group(1))).permutation(n_s)
    raise ConfigurationError(f"unknown shuffle mode {mode!r}")


def split_window(
    streams: Sequence[EventStream], t0: float, t1: float, n_s: int, split: str
) -> list[tuple[float, float]]:
    """Partition [t0, t1] into n_s sub-intervals shared by all cameras.

    equal_time cuts uniformly; equal_count places the cuts at quantiles of the
    pooled event times of all cameras, balancing total vote mass per
    sub-interval.
    """
    if n_s == 1:
        return [(t0, t1)]
    if split == "equal_time":
        edges = np.linspace(t0, t1, n_s + 1)
    else:
        pooled = np.sort(
            np.concatenate([crop_time(s, t0, t1, include_end=True).t for s in streams])
        )
        if pooled.size == 0:
            edges = np.linspace(t0, t1, n_s + 1)
        else:
            cut_idx = (np.arange(1, n_s) * pooled.size) // n_s
            edges = np.concatenate(([t0], pooled[cut_idx], [t1]))
    return [(float(edges[i]), float(edges[i + 1])) for i in range(n_s)]


def build_grid_matrix(
    streams: Sequence[EventStream],
    cams: Sequence[CameraModel],
    trajs: Sequence[Trajectory],
    ref: ReferenceView,
    n_z: int,
    z_min: float,
    z_max: float,
    window: tuple[float, float],
    n_s: int = 1,
    split: str = "equal_count",
    clamp: bool = True,
    workers: int = 1,
    sampling: str = "inverse_depth",
) -> list[list[DsiGrid]]:
    """One grid per (camera, sub-interval), all at the shared reference view.

    Empty sub-intervals still produce (zero) grids, with a warning; harmonic
    fusion then correctly reports no support there.
    """
    t0, t1 = window
    bounds = split_window(streams, t0, t1, n_s, split)
    matrix = []
    for ci, (stream, cam, traj) in enumerate(zip(streams, cams, trajs)):
        row = []
        for si, (a, b) in enumerate(bounds):
            grid = new_grid(ref, n_z, z_min, z_max, sampling=sampling)
            sub = crop_time(stream, a, b, include_end=(si == n_s - 1))
            if len(sub) == 0:
                logger.warning("camera %d sub-interval %d [%g, %g] holds no events", ci, si, a, b)
            else:
                sweep_events(grid, Packet(stream.camera_id, a, b, sub), cam, traj,
                             clamp=clamp, workers=workers)
            row.append(grid)
        matrix.append(row)
    return matrix


def fuse_grid_matrix(scheme: FusionScheme, matrix: Sequence[Sequence[DsiGrid]]) -> DsiGrid:
    """Fuse a (camera, sub-interval) grid matrix along both axes per the scheme."""
    n_c = len(matrix)
    if n_c == 0:
        raise ConfigurationError("no cameras to fuse")
    n_s = len(matrix[0])
    if any(len(row) != n_s for row in matrix):
        raise ConfigurationError("ragged grid matrix")

    pairing = np.arange(n_s)
    if scheme.shuffle != "off" and n_s >= 2:
        if scheme.order == "camera_first":
            pairing = shuffle_pairing(n_s, scheme.shuffle)
        else:
            logger.warning("shuffle has no effect in time_first order; ignoring")

    if scheme.order == "camera_first":
        time_acc = _Accumulator(scheme.time_fn)
        template = None
        for s in range(n_s):
            inputs = [matrix[0][s]] + [matrix[c][int(pairing[s])] for c in range(1, n_c)]
            fused_s = fuse_grids(scheme.camera_fn, inputs)
            template = template or fused_s
            time_acc.add(fused_s.values)
        out = template.copy_empty()
        out.values = time_acc.result().astype(np.float32)
    else:
        per_camera = []
        for c in range(n_c):
            time_acc = _Accumulator(scheme.time_fn)
            for s in range(n_s):
                time_acc.add(matrix[c][s].values)
            g = matrix[c][0].copy_empty()
            g.values = time_acc.result().astype(np.float32)
            per_camera.append(g)
        out = fuse_grids(scheme.camera_fn, per_camera)
    for row in matrix:
        for g in row:
            out.stats.merge(g.stats)
    return out


def default_reference_view(
    trajs: Sequence[Trajectory], cams: Sequence[CameraModel], t: float, clamp: bool = True
) -> ReferenceView:
    """Reference view at camera 0's interpolated pose with camera 0's pinhole intrinsics."""
    cam0 = cams[0]
    ideal = CameraModel(cam0.fx, cam0.fy, cam0.cx, cam0.cy, cam0.width, cam0.height)
    return ReferenceView(trajs[0].interpolate(t, clamp=clamp), ideal)


def apply_scheme(
    scheme: FusionScheme,
    streams: Sequence[EventStream],
    cams: Sequence[CameraModel],
    trajs: Sequence[Trajectory],
    n_z: int,
    z_min: float,
    z_max: float,
    window: tuple[float, float] | None = None,
    ref: ReferenceView | None = None,
    clamp: bool = True,
    workers: int = 1,
    sampling: str = "inverse_depth",
) -> DsiGrid:
    """Build the per-(camera, sub-interval) grids and fuse them per the scheme.

    The shared reference view defaults to camera 0's pose at the window
    midpoint. Returns the fused grid; per-sweep statistics of every input grid
    are merged into its stats.
    """
    if not streams:
        raise ConfigurationError("apply_scheme needs at least one camera")
    if not (len(streams) == len(cams) == len(trajs)):
        raise ConfigurationError("streams, cameras, and trajectories must align")
    if window is None:
        window = (
            min(float(s.t[0]) for s in streams if len(s)),
            max(float(s.t[-1]) for s in streams if len(s)),
        )
    if ref is None:
        ref = default_reference_view(trajs, cams, 0.5 * (window[0] + window[1]), clamp=clamp)
    matrix = build_grid_matrix(
        streams, cams, trajs, ref, n_z, z_min, z_max, window,
        n_s=scheme.n_s, split=scheme.split, clamp=clamp, workers=workers, sampling=sampling,
    )
    return fuse_grid_matrix(scheme, matrix)
