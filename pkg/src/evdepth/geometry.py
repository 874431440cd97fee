"""Camera models, pose interpolation, and plane-induced event warping.

Pose convention used throughout the package: a Pose maps camera coordinates to
world coordinates (world-from-camera). The relative pose of an event camera
with respect to a reference view is ref.pose^-1 o event_pose, i.e. the event
camera's pose expressed in the reference frame. The plane-induced homography
H = (R + t e3^T / Z)^-1 takes (R, t) in the opposite direction
(camera-from-reference); homography_for_plane performs that inversion
internally so callers never juggle both conventions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    DistortionError,
    OrderingError,
    RangeError,
)

_E3 = np.array([0.0, 0.0, 1.0])


@dataclass
class CameraModel:
    """Pinhole camera with radial-tangential distortion (k1, k2, p1, p2, k3).

    Treated as immutable after construction.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        self.distortion = np.asarray(self.distortion, dtype=np.float64)
        if self.distortion.shape != (5,):
            raise ConfigurationError(
                f"distortion must be 5 coefficients (k1,k2,p1,p2,k3), got shape {self.distortion.shape}"
            )
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigurationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ConfigurationError("principal point must lie inside the sensor")
        self._lut = None

    @property
    def has_distortion(self) -> bool:
        return bool(np.any(self.distortion != 0.0))

    def matches(self, other: "CameraModel") -> bool:
        return (
            (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            == (other.fx, other.fy, other.cx, other.cy, other.width, other.height)
            and np.array_equal(self.distortion, other.distortion)
        )

    # -- forward model -----------------------------------------------------

    def distort_normalized(self, xn: np.ndarray) -> np.ndarray:
        """Apply the distortion model to normalized coordinates (..., 2)."""
        xn = np.asarray(xn, dtype=np.float64)
        x, y = xn[..., 0], xn[..., 1]
        k1, k2, p1, p2, k3 = self.distortion
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        return np.stack([xd, yd], axis=-1)

    def normalized_to_pixel(self, xn: np.ndarray) -> np.ndarray:
        """Ideal pinhole projection of normalized coordinates, no distortion."""
        xn = np.asarray(xn, dtype=np.float64)
        return np.stack(
            [self.fx * xn[..., 0] + self.cx, self.fy * xn[..., 1] + self.cy], axis=-1
        )

    def project_points(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project camera-frame 3D points (..., 3) to distorted pixels.

        Returns:
            pixels (..., 2) and a validity mask (point in front of the camera).
        """
        pts = np.asarray(pts, dtype=np.float64)
        z = pts[..., 2]
        valid = z > 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.stack([pts[..., 0] / z, pts[..., 1] / z], axis=-1)
        xn = np.where(valid[..., None], xn, 0.0)
        return self.normalized_to_pixel(self.distort_normalized(xn)), valid

    # -- inverse model -----------------------------------------------------

    def undistort_pixels(
        self, pixels: np.ndarray, max_iterations: int = 20, tolerance: float = 1e-8
    ) -> np.ndarray:
        """Map distorted pixels (..., 2) to ideal normalized coordinates.

        Fixed-point iteration on the forward model; converged when re-distorting
        the estimate reproduces the input within `tolerance` normalized units.

        Raises:
            DistortionError: some pixel fails to converge (extreme coefficients).
        """
        pixels = np.asarray(pixels, dtype=np.float64)
        xd = np.stack(
            [(pixels[..., 0] - self.cx) / self.fx, (pixels[..., 1] - self.cy) / self.fy],
            axis=-1,
        )
        if not self.has_distortion:
            return xd
        k1, k2, p1, p2, k3 = self.distortion
        x, y = xd[..., 0].copy(), xd[..., 1].copy()
        for _ in range(max_iterations):
            r2 = x * x + y * y
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
            dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
            x = (xd[..., 0] - dx) / radial
            y = (xd[..., 1] - dy) / radial
            residual = self.distort_normalized(np.stack([x, y], axis=-1)) - xd
            if np.max(np.abs(residual)) < tolerance:
                return np.stack([x, y], axis=-1)
        raise DistortionError(
            f"undistortion did not reach residual < {tolerance} in {max_iterations} iterations"
        )

    def undistort_lut(self) -> np.ndarray:
        """(height, width, 2) table of undistorted normalized coordinates per pixel."""
        if self._lut is None:
            u, v = np.meshgrid(np.arange(self.width), np.arange(self.height))
            px = np.stack([u, v], axis=-1).astype(np.float64)
            self._lut = self.undistort_pixels(px.reshape(-1, 2)).reshape(self.height, self.width, 2)
        return self._lut


def undistort_pixel(cam: CameraModel, p) -> tuple[float, float]:
    """Single-pixel convenience wrapper around CameraModel.undistort_pixels."""
    xn = cam.undistort_pixels(np.asarray(p, dtype=np.float64).reshape(1, 2))[0]
    return float(xn[0]), float(xn[1])


@dataclass
class Pose:
    """Rigid transform mapping camera coordinates to world coordinates."""

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    @staticmethod
    def from_quaternion_xyzw(q, t) -> "Pose":
        return Pose(Rotation.from_quat(np.asarray(q, dtype=np.float64)), t)

    def quaternion_xyzw(self) -> np.ndarray:
        return self.rotation.as_quat()

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.as_matrix()
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "Pose":
        rinv = self.rotation.inv()
        return Pose(rinv, -rinv.apply(self.translation))

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation * other.rotation,
            self.rotation.apply(other.translation) + self.translation,
        )

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return self.rotation.apply(np.atleast_2d(pts)) + self.translation


@dataclass
class ReferenceView:
    """Virtual view the DSI is expressed in: a pose plus pinhole intrinsics.

    The camera's distortion is ignored on the reference side; the DSI raster is
    the ideal pinhole image of `camera`.
    """

    pose: Pose
    camera: CameraModel


class Trajectory:
    """Time-indexed poses with linear translation / slerp rotation interpolation.

    Timestamps must be strictly increasing. Scalar lookups keep a bracketing
    cursor so sweeps over time-sorted events cost amortized O(1) per query.
    """

    def __init__(self, times: np.ndarray, rotations: Rotation, translations: np.ndarray):
        self.times = np.asarray(times, dtype=np.float64)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ConfigurationError("trajectory needs at least one timestamped pose")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise OrderingError("trajectory timestamps must be strictly increasing")
        self.rotations = rotations
        self.translations = np.asarray(translations, dtype=np.float64).reshape(-1, 3)
        if len(self.translations) != len(self.times) or len(rotations) != len(self.times):
            raise ConfigurationError("trajectory column lengths differ")
        self._slerp = Slerp(self.times, rotations) if len(self.times) > 1 else None
        self._cursor = 0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def pose(self, i: int) -> Pose:
        return Pose(self.rotations[i], self.translations[i])

    def _prepare_query(self, t: np.ndarray, clamp: bool) -> np.ndarray:
        if clamp:
            return np.clip(t, self.times[0], self.times[-1])
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise RangeError(
                f"query time outside trajectory range [{self.times[0]}, {self.times[-1]}] "
                "and clamping is disabled"
            )
        return t

    def interpolate(self, t: float, clamp: bool = False) -> Pose:
        """Pose at time t; exact at sample times."""
        t = float(self._prepare_query(np.asarray(t, dtype=np.float64), clamp))
        if len(self.times) == 1:
            return self.pose(0)
        # Cached cursor: advance/retreat to the bracketing segment.
        i = min(self._cursor, len(self.times) - 2)
        while i > 0 and t < self.times[i]:
            i -= 1
        while i < len(self.times) - 2 and t > self.times[i + 1]:
            i += 1
        self._cursor = i
        t0, t1 = self.times[i], self.times[i + 1]
        alpha = (t - t0) / (t1 - t0)
        trans = (1.0 - alpha) * self.translations[i] + alpha * self.translations[i + 1]
        rot = self._slerp(np.array([t]))[0]
        return Pose(rot, trans)

    def interpolate_many(self, t: np.ndarray, clamp: bool = False) -> tuple[Rotation, np.ndarray]:
        """Vectorized interpolation; returns (rotations, translations (n, 3))."""
        t = self._prepare_query(np.asarray(t, dtype=np.float64), clamp)
        if len(self.times) == 1:
            n = len(t)
            return self.rotations[np.zeros(n, dtype=int)], np.broadcast_to(
                self.translations[0], (n, 3)
            ).copy()
        seg = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        t0 = self.times[seg]
        t1 = self.times[seg + 1]
        alpha = ((t - t0) / (t1 - t0))[:, None]
        trans = (1.0 - alpha) * self.translations[seg] + alpha * self.translations[seg + 1]
        return self._slerp(t), trans

    def compose_right(self, extrinsic: Pose) -> "Trajectory":
        """Trajectory of a rigidly attached frame: world_from_x(t) = self(t) o extrinsic."""
        rots = self.rotations * extrinsic.rotation
        trans = self.rotations.apply(
            np.broadcast_to(extrinsic.translation, (len(self.times), 3))
        ) + self.translations
        return Trajectory(self.times, rots, trans)


def interpolate_pose(traj: Trajectory, t: float, clamp: bool = False) -> Pose:
    """Functional alias for Trajectory.interpolate."""
    return traj.interpolate(t, clamp=clamp)


def relative_pose(ref: Pose, other: Pose) -> Pose:
    """Pose of `other`'s camera expressed in `ref`'s camera frame (ref_from_other)."""
    return ref.inverse() @ other


def plane_homography(cam_from_ref: Pose, z: float) -> np.ndarray:
    """Homography warping event-camera normalized coords onto the plane z=Z of the reference.

    `cam_from_ref` maps reference-frame coordinates into the event camera frame;
    with (R, t) its components the matrix is (R + t e3^T / Z)^-1, normalized so
    the bottom-right entry is 1 when nonzero.

    Raises:
        DegenerateGeometryError: the plane passes through the event camera's
            optical center, making R + t e3^T / Z singular.
    """
    if z <= 0:
        raise ConfigurationError(f"plane depth must be positive, got {z}")
    m = cam_from_ref.rotation.as_matrix() + np.outer(cam_from_ref.translation, _E3) / z
    det = np.linalg.det(m)
    if abs(det) < 1e-15:
        raise DegenerateGeometryError(f"depth plane Z={z} passes through the optical center")
    h = np.linalg.inv(m)
    if abs(h[2, 2]) > 1e-15:
        h = h / h[2, 2]
    return h


def homography_for_plane(event_pose: Pose, ref: ReferenceView, z: float) -> np.ndarray:
    """Plane-induced homography from event-camera to reference normalized coordinates.

    Both poses are world-from-camera in a common world frame; the relative pose
    ref^-1 o event_pose is inverted internally to the camera-from-reference
    transform the homography formula expects.
    """
    rel = relative_pose(ref.pose, event_pose)
    return plane_homography(rel.inverse(), z)


def warp_event_normalized(xn: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Apply a homography to normalized coordinates; raises on points at infinity."""
    q = h @ np.array([xn[0], xn[1], 1.0])
    if abs(q[2]) < 1e-12:
        raise DegenerateGeometryError("warp sends the event to infinity (homogeneous w ~ 0)")
    return q[:2] / q[2]


def warp_event(event, cam: CameraModel, event_pose: Pose, ref: ReferenceView, z: float):
    """Warp one event onto the reference-view plane z=Z; returns RV pixel coordinates.

    The event pixel is undistorted first; the result may fall outside the
    reference image (callers discard out-of-bounds votes).
    """
    xn = cam.undistort_pixels(np.array([[event.x, event.y]], dtype=np.float64))[0]
    h = homography_for_plane(event_pose, ref, z)
    wn = warp_event_normalized(xn, h)
    px = ref.camera.normalized_to_pixel(wn)
    return float(px[0]), float(px[1])


def warp_points_to_planes(
    xn: np.ndarray,
    rot_ref_from_cam: Rotation,
    t_ref_from_cam: np.ndarray,
    plane_depths: np.ndarray,
    ref_cam: CameraModel,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Warp undistorted normalized event coords to every depth plane at once.

    Algebraically identical to applying homography_for_plane per (event, plane)
    but phrased as ray-plane intersection so no per-pair matrix inverse is
    needed: with r = R x_hat the plane z=Z is met at lambda = (Z - t_z) / r_z.

    Args:
        xn: (n, 2) undistorted normalized event coordinates.
        rot_ref_from_cam / t_ref_from_cam: per-event pose of the event camera
            in the reference frame (n rotations, (n, 3) translations).
        plane_depths: (nz,) plane depths in the reference frame.
        ref_cam: reference-view intrinsics (pinhole only).

    Returns:
        u, v: (n, nz) reference-view pixel coordinates, and a (n, nz) validity
        mask (intersection in front of the event camera, not at infinity).
    """
    n = xn.shape[0]
    rays = np.concatenate([xn, np.ones((n, 1))], axis=1)
    r = rot_ref_from_cam.apply(rays)
    z = np.asarray(plane_depths, dtype=np.float64)[None, :]
    tz = t_ref_from_cam[:, 2:3]
    rz = r[:, 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (z - tz) / rz
        xr = (lam * r[:, 0:1] + t_ref_from_cam[:, 0:1]) / z
        yr = (lam * r[:, 1:2] + t_ref_from_cam[:, 1:2]) / z
    valid = np.isfinite(xr) & np.isfinite(yr) & (lam > 0)
    u = ref_cam.fx * xr + ref_cam.cx
    v = ref_cam.fy * yr + ref_cam.cy
    return u, v, valid
