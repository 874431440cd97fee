"""Synthetic multi-camera event generation with analytic ground truth.

Two generation modes. The geometric mode tracks sampled edge points through
each camera's projection and fires an event whenever a projection has moved a
pixel; it validates warping and sweeping independently of any brightness
model. The photometric mode integrates an analytic log-intensity plane texture
per pixel and fires on contrast-threshold crossings, so threshold sweeps
behave like a contrast-threshold sweep on a real sensor. Both are seeded and
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigurationError
from .events import EventStream, concatenate
from .geometry import CameraModel, Pose, ReferenceView, Trajectory


@dataclass
class SinusoidTexture:
    """Log-intensity as a sum of plane waves over the plane's (u, v) chart.

    L(u, v) = sum_i a_i sin(2 pi f_i (u cos g_i + v sin g_i) + phase_i)
    with f in cycles per meter.
    """

    amplitudes: np.ndarray = field(default_factory=lambda: np.array([0.4, 0.25]))
    frequencies: np.ndarray = field(default_factory=lambda: np.array([1.0, 2.0]))
    angles: np.ndarray = field(default_factory=lambda: np.array([0.35, 1.85]))
    phases: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.3]))

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        self.angles = np.asarray(self.angles, dtype=np.float64)
        self.phases = np.asarray(self.phases, dtype=np.float64)

    def value(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(u, dtype=np.float64))
        for a, f, g, ph in zip(self.amplitudes, self.frequencies, self.angles, self.phases):
            out += a * np.sin(2.0 * np.pi * f * (u * np.cos(g) + v * np.sin(g)) + ph)
        return out

    @property
    def total_amplitude(self) -> float:
        return float(self.amplitudes.sum())


@dataclass
class PlanePatch:
    """Bounded textured plane: a point, a unit normal, and half-extents along its chart axes."""

    origin: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    half_extent: tuple[float, float] = (1.0, 1.0)
    texture: SinusoidTexture | None = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        n = np.asarray(self.normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)
        up = np.array([0.0, 1.0, 0.0])
        if abs(np.dot(up, self.normal)) > 0.9:
            up = np.array([1.0, 0.0, 0.0])
        e1 = np.cross(up, self.normal)
        self.e1 = e1 / np.linalg.norm(e1)
        self.e2 = np.cross(self.normal, self.e1)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        """Ray-plane intersection; returns (s, u, v, hit) with s the ray parameter."""
        denom = dirs @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((self.origin - origins) @ self.normal) / denom
        pts = origins + s[..., None] * dirs
        rel = pts - self.origin
        u = rel @ self.e1
        v = rel @ self.e2
        hit = (
            np.isfinite(s) & (s > 0)
            & (np.abs(u) <= self.half_extent[0])
            & (np.abs(v) <= self.half_extent[1])
        )
        return s, u, v, hit


@dataclass
class Scene:
    """World-frame geometry: 3D line segments and/or textured plane patches."""

    segments: np.ndarray | None = None
    planes: list[PlanePatch] = field(default_factory=list)

    def __post_init__(self):
        if self.segments is not None:
            self.segments = np.asarray(self.segments, dtype=np.float64).reshape(-1, 2, 3)


@dataclass
class RigConfig:
    """Camera rig: intrinsics, rig-from-camera extrinsics, shared trajectory, threshold."""

    cameras: list[CameraModel]
    extrinsics: list[Pose]
    trajectory: Trajectory
    theta: float = 0.2

    def __post_init__(self):
        if len(self.cameras) != len(self.extrinsics):
            raise ConfigurationError("one extrinsic pose per camera is required")

    @property
    def n_cameras(self) -> int:
        return len(self.cameras)

    def camera_trajectory(self, i: int) -> Trajectory:
        """world-from-camera trajectory of camera i."""
        return self.trajectory.compose_right(self.extrinsics[i])


def linear_trajectory(
    velocity, duration: float, n_samples: int = 101, start=(0.0, 0.0, 0.0)
) -> Trajectory:
    """Constant-velocity, rotation-free rig trajectory over [0, duration]."""
    times = np.linspace(0.0, duration, n_samples)
    trans = np.asarray(start, dtype=np.float64)[None, :] + times[:, None] * np.asarray(velocity)[None, :]
    return Trajectory(times, Rotation.identity(n_samples), trans)


def default_rig(
    n_cameras: int = 2,
    baseline: float = 0.2,
    width: int = 240,
    height: int = 180,
    focal: float = 200.0,
    speed: float = 0.5,
    duration: float = 1.0,
    theta: float = 0.2,
) -> RigConfig:
    """Desk-scale stereo rig: 240x180 px, f=200, 0.2 m baseline, 0.5 m/s sideways."""
    cams = [
        CameraModel(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height)
        for _ in range(n_cameras)
    ]
    extrinsics = [Pose(Rotation.identity(), np.array([i * baseline, 0.0, 0.0])) for i in range(n_cameras)]
    traj = linear_trajectory((speed, 0.0, 0.0), duration)
    return RigConfig(cams, extrinsics, traj, theta=theta)


def grid_plane_segments(
    z: float = 2.0, half_width: float = 1.2, half_height: float = 0.8, n_lines: int = 9
) -> np.ndarray:
    """Grid of horizontal+vertical segments on the world plane z=Z (an edge-rich flat target)."""
    xs = np.linspace(-half_width, half_width, n_lines)
    ys = np.linspace(-half_height, half_height, n_lines)
    segs = []
    for x in xs:
        segs.append([[x, -half_height, z], [x, half_height, z]])
    for y in ys:
        segs.append([[-half_width, y, z], [half_width, y, z]])
    return np.asarray(segs)


def plane_scene(z: float = 2.0, textured: bool = True, **kwargs) -> Scene:
    """Fronto-parallel plane scene at depth z with a segment grid and optional texture."""
    patch = PlanePatch(
        origin=np.array([0.0, 0.0, z]),
        half_extent=(kwargs.get("half_width", 1.2), kwargs.get("half_height", 0.8)),
        texture=SinusoidTexture() if textured else None,
    )
    return Scene(
        segments=grid_plane_segments(
            z, kwargs.get("half_width", 1.2), kwargs.get("half_height", 0.8),
            kwargs.get("n_lines", 9),
        ),
        planes=[patch],
    )


def _sample_segments(segments: np.ndarray, samples_per_edge: int) -> np.ndarray:
    alphas = np.linspace(0.0, 1.0, samples_per_edge)
    pts = (
        segments[:, None, 0, :] * (1.0 - alphas)[None, :, None]
        + segments[:, None, 1, :] * alphas[None, :, None]
    )
    return pts.reshape(-1, 3)


def _camera_world_poses(cam_traj: Trajectory, times: np.ndarray):
    """Per-step camera-from-world rotations and translations."""
    rot_wc, t_wc = cam_traj.interpolate_many(times, clamp=True)
    rot_cw = rot_wc.inv()
    t_cw = -rot_cw.apply(t_wc)
    return rot_wc, t_wc, rot_cw, t_cw


def _uniform_noise_events(
    rate: float, cam: CameraModel, t0: float, t1: float, rng: np.random.Generator, camera_id: str
) -> EventStream:
    n = int(round(rate * cam.width * cam.height * (t1 - t0)))
    t = np.sort(rng.uniform(t0, t1, n))
    x = rng.integers(0, cam.width, n)
    y = rng.integers(0, cam.height, n)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), n)
    return EventStream(t, x, y, p, cam.width, cam.height, camera_id)


def generate_events_geometric(
    scene: Scene,
    rig: RigConfig,
    duration: float,
    samples_per_edge: int = 25,
    dt: float = 1e-3,
    min_shift_px: float = 1.0,
    noise_rate: float = 0.0,
    seed: int = 0,
) -> list[EventStream]:
    """Edge-point tracking generator; returns one time-sorted stream per camera.

    Each sampled edge point fires an event when its projection has moved at
    least `min_shift_px` pixels since its previous event in that camera;
    polarity is the sign of the horizontal motion. Points behind a camera or
    off-sensor are skipped at that instant.
    """
    if scene.segments is None or len(scene.segments) == 0:
        raise ConfigurationError("geometric generation needs line segments in the scene")
    pts_w = _sample_segments(scene.segments, samples_per_edge)
    times = np.arange(0.0, duration + 0.5 * dt, dt)
    streams = []
    for ci in range(rig.n_cameras):
        cam = rig.cameras[ci]
        cam_traj = rig.camera_trajectory(ci)
        _, _, rot_cw, t_cw = _camera_world_poses(cam_traj, times)
        last_px = np.zeros((len(pts_w), 2))
        tracked = np.zeros(len(pts_w), dtype=bool)
        ev_t, ev_x, ev_y, ev_p = [], [], [], []
        for si, t in enumerate(times):
            pts_cam = rot_cw[si].apply(pts_w) + t_cw[si]
            px, in_front = cam.project_points(pts_cam)
            on_sensor = (
                in_front
                & (px[:, 0] >= 0) & (px[:, 0] <= cam.width - 1)
                & (px[:, 1] >= 0) & (px[:, 1] <= cam.height - 1)
            )
            fresh = on_sensor & ~tracked
            last_px[fresh] = px[fresh]
            tracked |= fresh
            tracked &= on_sensor
            moved = np.zeros(len(pts_w), dtype=bool)
            active = tracked & on_sensor
            delta = px - last_px
            dist = np.hypot(delta[:, 0], delta[:, 1])
            moved[active] = dist[active] >= min_shift_px
            if np.any(moved):
                xi = np.rint(px[moved, 0]).astype(np.int64)
                yi = np.rint(px[moved, 1]).astype(np.int64)
                pol = np.where(delta[moved, 0] >= 0, 1, -1).astype(np.int8)
                ev_t.append(np.full(len(xi), t))
                ev_x.append(xi)
                ev_y.append(yi)
                ev_p.append(pol)
                last_px[moved] = px[moved]
        if ev_t:
            stream = EventStream(
                np.concatenate(ev_t), np.concatenate(ev_x), np.concatenate(ev_y),
                np.concatenate(ev_p), cam.width, cam.height, f"cam{ci}",
            )
        else:
            stream = EventStream(
                np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=int),
                np.zeros(0, dtype=np.int8), cam.width, cam.height, f"cam{ci}",
            )
        if noise_rate > 0:
            rng = np.random.default_rng(seed + 7919 * ci)
            noise = _uniform_noise_events(noise_rate, cam, 0.0, duration, rng, f"cam{ci}")
            stream = concatenate([stream, noise]) if len(stream) else noise
        streams.append(stream)
    return streams


def generate_events_photometric(
    scene: Scene,
    rig: RigConfig,
    theta: float | None = None,
    duration: float = 1.0,
    dt: float = 2e-3,
    noise_rate: float = 0.0,
    seed: int = 0,
) -> list[EventStream]:
    """Contrast-threshold generator on the scene's first textured plane.

    Per pixel, the analytic log intensity is sampled at fine time steps and a
    +-1 event is emitted each time the accumulated change since the pixel's
    last event crosses +-theta (the per-pixel reference level advances by theta
    per event, so one large step can emit several events with one timestamp).
    """
    theta = rig.theta if theta is None else theta
    if theta <= 0:
        raise ConfigurationError(f"contrast threshold must be positive, got {theta}")
    plane = next((p for p in scene.planes if p.texture is not None), None)
    if plane is None:
        raise ConfigurationError("photometric generation needs a textured plane in the scene")
    times = np.arange(0.0, duration + 0.5 * dt, dt)
    streams = []
    for ci in range(rig.n_cameras):
        cam = rig.cameras[ci]
        cam_traj = rig.camera_trajectory(ci)
        rot_wc, t_wc, _, _ = _camera_world_poses(cam_traj, times)
        lut = cam.undistort_lut()
        dirs_cam = np.concatenate([lut.reshape(-1, 2), np.ones((cam.width * cam.height, 1))], axis=1)
        ref_level = None
        ev_t, ev_flat, ev_p = [], [], []
        for si, t in enumerate(times):
            dirs_w = rot_wc[si].apply(dirs_cam)
            origins = np.broadcast_to(t_wc[si], dirs_w.shape)
            _, u, v, hit = plane.intersect(origins, dirs_w)
            level = np.where(hit, plane.texture.value(u, v), 0.0)
            if ref_level is None:
                ref_level = level.copy()
                continue
            k = np.trunc((level - ref_level) / theta).astype(np.int64)
            fired = np.flatnonzero(k)
            if fired.size:
                reps = np.abs(k[fired])
                ev_flat.append(np.repeat(fired, reps))
                ev_p.append(np.repeat(np.sign(k[fired]).astype(np.int8), reps))
                ev_t.append(np.full(int(reps.sum()), t))
                ref_level[fired] += k[fired] * theta
        if ev_t:
            flat = np.concatenate(ev_flat)
            stream = EventStream(
                np.concatenate(ev_t), flat % cam.width, flat // cam.width,
                np.concatenate(ev_p), cam.width, cam.height, f"cam{ci}",
            )
        else:
            stream = EventStream(
                np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=int),
                np.zeros(0, dtype=np.int8), cam.width, cam.height, f"cam{ci}",
            )
        if noise_rate > 0:
            rng = np.random.default_rng(seed + 7919 * ci)
            noise = _uniform_noise_events(noise_rate, cam, 0.0, duration, rng, f"cam{ci}")
            stream = concatenate([stream, noise]) if len(stream) else noise
        streams.append(stream)
    return streams


def render_gt_depth(
    scene: Scene, ref: ReferenceView, segment_samples: int = 1024
) -> np.ndarray:
    """Analytic depth of the scene at every reference-view pixel; NaN where empty.

    Plane patches give dense depth over their projection; segments are sampled
    and rasterized to the pixels they cross. Where several surfaces cover a
    pixel the nearest depth wins.
    """
    cam = ref.camera
    h, w = cam.height, cam.width
    depth = np.full((h, w), np.inf)

    if scene.planes:
        u, v = np.meshgrid(np.arange(w), np.arange(h))
        xn = (u - cam.cx) / cam.fx
        yn = (v - cam.cy) / cam.fy
        dirs_cam = np.stack([xn, yn, np.ones_like(xn)], axis=-1).reshape(-1, 3)
        dirs_w = ref.pose.rotation.apply(dirs_cam)
        origins = np.broadcast_to(ref.pose.translation, dirs_w.shape)
        for plane in scene.planes:
            s, _, _, hit = plane.intersect(origins, dirs_w)
            d = np.where(hit, s, np.inf).reshape(h, w)
            depth = np.minimum(depth, d)

    if scene.segments is not None and len(scene.segments):
        pts_w = _sample_segments(scene.segments, segment_samples)
        inv = ref.pose.inverse()
        pts_cam = inv.apply(pts_w)
        px, valid = cam.project_points(pts_cam)
        xi = np.rint(px[:, 0]).astype(np.int64)
        yi = np.rint(px[:, 1]).astype(np.int64)
        ok = valid & (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        z = pts_cam[:, 2]
        np.minimum.at(depth, (yi[ok], xi[ok]), z[ok])

    return np.where(np.isfinite(depth), depth, np.nan)
