"""Ray-density voxel grid: space-sweep construction and max-projections.

The grid lives at a reference view, planes uniformly spaced in inverse depth
with exact endpoints, values stored float32 plane-major (nz, h, w). Sweeping
deposits one unit of weight per event per plane via bilinear voting; polarity
never enters the vote.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParseError
from .events import Packet
from .geometry import CameraModel, ReferenceView, Trajectory, relative_pose, warp_points_to_planes

# Fixed chunking makes partial sums independent of the worker count, so sweeps
# are bitwise reproducible for any --threads value.
_CHUNK = 65536


def inverse_depth_planes(n_z: int, z_min: float, z_max: float) -> np.ndarray:
    """Plane depths uniform in inverse depth, endpoints exactly z_min and z_max.

    Plane 0 is the nearest (z_min); argmax tie-breaking toward lower index is
    therefore toward nearer depth.
    """
    if n_z < 2:
        raise ConfigurationError(f"need at least 2 depth planes, got {n_z}")
    if not (0 < z_min < z_max):
        raise ConfigurationError(f"need 0 < z_min < z_max, got [{z_min}, {z_max}]")
    inv = np.linspace(1.0 / z_min, 1.0 / z_max, n_z)
    depths = 1.0 / inv
    depths[0] = z_min
    depths[-1] = z_max
    return depths


def plane_depths_for(sampling: str, n_z: int, z_min: float, z_max: float) -> np.ndarray:
    """Plane depths for a sampling mode: "inverse_depth" (default) or "linear" (ablation)."""
    if sampling == "inverse_depth":
        return inverse_depth_planes(n_z, z_min, z_max)
    if sampling == "linear":
        if n_z < 2:
            raise ConfigurationError(f"need at least 2 depth planes, got {n_z}")
        if not (0 < z_min < z_max):
            raise ConfigurationError(f"need 0 < z_min < z_max, got [{z_min}, {z_max}]")
        return np.linspace(z_min, z_max, n_z)
    raise ConfigurationError(f"unknown depth sampling {sampling!r}")


@dataclass
class SweepStats:
    """Bookkeeping for one sweep: how many votes landed and why the rest did not."""

    n_events: int = 0
    n_votes_cast: float = 0.0
    n_votes_dropped_bounds: float = 0.0
    n_skipped_geometry: int = 0

    def merge(self, other: "SweepStats") -> None:
        self.n_events += other.n_events
        self.n_votes_cast += other.n_votes_cast
        self.n_votes_dropped_bounds += other.n_votes_dropped_bounds
        self.n_skipped_geometry += other.n_skipped_geometry


@dataclass
class DsiGrid:
    """Ray-density volume at a reference view.

    values has shape (n_z, height, width); plane_depths[k] gives the depth of
    plane k, decreasing in inverse depth (near to far).
    """

    ref: ReferenceView
    n_z: int
    z_min: float
    z_max: float
    values: np.ndarray = None
    stats: SweepStats = field(default_factory=SweepStats)
    sampling: str = "inverse_depth"

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(
                (self.n_z, self.ref.camera.height, self.ref.camera.width), dtype=np.float32
            )
        self.plane_depths = plane_depths_for(self.sampling, self.n_z, self.z_min, self.z_max)

    @property
    def width(self) -> int:
        return self.ref.camera.width

    @property
    def height(self) -> int:
        return self.ref.camera.height

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def total_mass(self) -> float:
        return float(self.values.sum(dtype=np.float64))

    def aligned_with(self, other: "DsiGrid") -> bool:
        """Same raster, same depth sampling, same reference pose."""
        return (
            self.shape == other.shape
            and self.n_z == other.n_z
            and self.z_min == other.z_min
            and self.z_max == other.z_max
            and self.sampling == other.sampling
            and self.ref.camera.matches(other.ref.camera)
            and np.allclose(self.ref.pose.matrix(), other.ref.pose.matrix(), atol=1e-12)
        )

    def copy_empty(self) -> "DsiGrid":
        return DsiGrid(self.ref, self.n_z, self.z_min, self.z_max, sampling=self.sampling)


def new_grid(
    ref: ReferenceView, n_z: int, z_min: float, z_max: float, sampling: str = "inverse_depth"
) -> DsiGrid:
    """Zero-initialized grid; planes uniform in inverse depth unless sampling="linear"."""
    return DsiGrid(ref, n_z, z_min, z_max, sampling=sampling)


def bilinear_vote(grid: DsiGrid, k: int, p, weight: float = 1.0) -> float:
    """Deposit `weight` on the <=4 integer neighbors of sub-pixel position p on plane k.

    Corners falling outside the raster are dropped silently; returns the weight
    actually deposited.
    """
    if weight <= 0:
        raise ConfigurationError("vote weight must be positive")
    u, v = float(p[0]), float(p[1])
    x0, y0 = int(np.floor(u)), int(np.floor(v))
    fx, fy = u - x0, v - y0
    deposited = 0.0
    plane = grid.values[k]
    for dx, dy, w in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        if w == 0.0:
            continue
        x, y = x0 + dx, y0 + dy
        if 0 <= x < grid.width and 0 <= y < grid.height:
            plane[y, x] += weight * w
            deposited += weight * w
    return deposited


def _sweep_chunk(
    xn: np.ndarray,
    rot_rc,
    t_rc: np.ndarray,
    grid_shape: tuple[int, int, int],
    plane_depths: np.ndarray,
    ref_cam: CameraModel,
) -> tuple[np.ndarray, SweepStats]:
    """Warp one chunk of undistorted events to all planes and bin the votes.

    Returns a float64 partial accumulator (flattened grid) plus stats.
    """
    nz, h, w = grid_shape
    u, v, valid = warp_points_to_planes(xn, rot_rc, t_rc, plane_depths, ref_cam)
    stats = SweepStats(n_events=xn.shape[0])
    stats.n_skipped_geometry = int((~valid).sum())

    # Degenerate warps may be NaN/inf; park them at 0 so the int cast is safe.
    u = np.where(valid, u, 0.0)
    v = np.where(valid, v, 0.0)
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0
    plane_idx = np.broadcast_to(np.arange(nz, dtype=np.int64)[None, :], u.shape)

    partial = np.zeros(nz * h * w, dtype=np.float64)
    total_in = 0.0
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        x = x0 + dx
        y = y0 + dy
        ok = valid & (x >= 0) & (x < w) & (y >= 0) & (y < h) & (wgt > 0)
        idx = (plane_idx[ok] * h + y[ok]) * w + x[ok]
        wv = wgt[ok]
        partial += np.bincount(idx, weights=wv, minlength=nz * h * w)
        total_in += float(wv.sum())
    stats.n_votes_cast = total_in
    # Weight that a valid warp failed to deposit because corners left the raster.
    stats.n_votes_dropped_bounds = float(valid.sum()) - total_in
    return partial, stats


def sweep_events(
    grid: DsiGrid,
    packet: Packet,
    cam: CameraModel,
    traj: Trajectory,
    clamp: bool = True,
    workers: int = 1,
) -> SweepStats:
    """Back-project every event of the packet onto every depth plane of the grid.

    Events are undistorted through the camera's lookup table, posed by
    interpolating `traj` (the event camera's own world-from-camera trajectory)
    at their timestamps, and voted bilinearly into the grid. Warp-degenerate
    events (behind the camera, at infinity) are skipped and counted, never
    aborting the packet.

    The event list is processed in fixed-size chunks; with workers > 1 the
    chunks run on a thread pool and partial grids are reduced in chunk order,
    so the result is identical for any worker count.
    """
    ev = packet.events
    stats = SweepStats()
    if len(ev) == 0:
        grid.stats.merge(stats)
        return stats

    lut = cam.undistort_lut()
    xn_all = lut[ev.y, ev.x]
    rot_all, trans_all = traj.interpolate_many(ev.t, clamp=clamp)
    ref_inv = grid.ref.pose.inverse()
    rot_rc_all = ref_inv.rotation * rot_all
    t_rc_all = ref_inv.rotation.apply(trans_all) + ref_inv.translation

    spans = [(a, min(a + _CHUNK, len(ev))) for a in range(0, len(ev), _CHUNK)]

    def run(span):
        a, b = span
        return _sweep_chunk(
            xn_all[a:b], rot_rc_all[a:b], t_rc_all[a:b],
            grid.shape, grid.plane_depths, grid.ref.camera,
        )

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, spans))
    else:
        results = [run(s) for s in spans]

    acc = np.zeros(grid.values.size, dtype=np.float64)
    for partial, chunk_stats in results:
        acc += partial
        stats.merge(chunk_stats)
    grid.values += acc.reshape(grid.shape).astype(np.float32)
    grid.stats.merge(stats)
    return stats


def max_projections(grid: DsiGrid) -> dict[str, np.ndarray]:
    """Per-axis maximum projections.

    front: (h, w) image, the unnormalized confidence map; top: (n_z, w) seen
    from above; side: (h, n_z) seen from the side.
    """
    vals = grid.values
    return {
        "front": vals.max(axis=0),
        "top": vals.max(axis=1),
        "side": vals.max(axis=2).T,
    }


_DUMP_HEADER = struct.Struct("<IIIff")


def write_grid_dump(path, grid: DsiGrid) -> None:
    """Debug dump: little-endian header (w, h, n_z, z_min, z_max) + float32 plane-major values."""
    with open(path, "wb") as f:
        f.write(_DUMP_HEADER.pack(grid.width, grid.height, grid.n_z, grid.z_min, grid.z_max))
        f.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def read_grid_dump(path) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Read a grid dump; returns (values (n_z, h, w), plane_depths, (z_min, z_max)).

    The dump carries no reference pose; it is a debugging artifact, not a
    round-trip of the full grid.
    """
    with open(path, "rb") as f:
        header = f.read(_DUMP_HEADER.size)
        if len(header) != _DUMP_HEADER.size:
            raise ParseError("grid dump shorter than its header")
        w, h, n_z, z_min, z_max = _DUMP_HEADER.unpack(header)
        payload = f.read()
    expected = n_z * h * w * 4
    if len(payload) != expected:
        raise ParseError(f"grid dump payload is {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f4").reshape(n_z, h, w).copy()
    return values, inverse_depth_planes(n_z, float(z_min), float(z_max)), (float(z_min), float(z_max))
