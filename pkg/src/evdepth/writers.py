"""File writers and loaders: PFM depth maps, PLY clouds, PNG renderings, JSON configs.

PFM follows the standard: "Pf" header, width height, negative scale for
little-endian, rows bottom-up, float32. NaN marks invalid pixels.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError, ParseError
from .geometry import CameraModel, Pose
from .simulator import PlanePatch, RigConfig, Scene, SinusoidTexture, default_rig, grid_plane_segments


def write_pfm(path, data: np.ndarray) -> None:
    """Write a (h, w) float map as grayscale PFM, bottom-up, little-endian."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ConfigurationError("PFM writer expects a 2-D map")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{data.shape[1]} {data.shape[0]}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1], dtype="<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"Pf":
            raise ParseError(f"{path}: not a grayscale PFM file")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ParseError(f"{path}: malformed PFM dimensions line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        payload = f.read(w * h * 4)
    if len(payload) != w * h * 4:
        raise ParseError(f"{path}: truncated PFM payload")
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return data[::-1].astype(np.float32)


def load_depth_map(path) -> np.ndarray:
    """Depth map from .pfm or .npy; non-finite and non-positive values mean missing."""
    p = Path(path)
    if p.suffix.lower() == ".npy":
        return np.load(p).astype(np.float32)
    return read_pfm(p)


def write_ply(path, points: np.ndarray) -> None:
    """ASCII PLY point cloud, xyz float vertices."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(points)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("end_header\n")
        for x, y, z in points:
            f.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def read_ply_points(path) -> np.ndarray:
    with open(path) as f:
        line = f.readline().strip()
        if line != "ply":
            raise ParseError(f"{path}: not a PLY file")
        n = 0
        while True:
            line = f.readline()
            if not line:
                raise ParseError(f"{path}: missing end_header")
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            if line.strip() == "end_header":
                break
        pts = np.loadtxt(f, max_rows=n).reshape(-1, 3) if n else np.zeros((0, 3))
    return pts


def depth_to_rgba(depth: np.ndarray, mask: np.ndarray, z_min: float, z_max: float) -> np.ndarray:
    """Colorize depth red (near) to blue (far), linear in inverse depth; invalid transparent."""
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (1.0 / depth - 1.0 / z_max) / (1.0 / z_min - 1.0 / z_max)
    s = np.clip(np.where(mask, s, 0.0), 0.0, 1.0)
    # Hue ramp 0 (red) -> 2/3 (blue) through yellow/green/cyan.
    hue = (1.0 - s) * (2.0 / 3.0)
    rgb = _hsv_to_rgb(hue, np.ones_like(hue), np.ones_like(hue))
    rgba = np.concatenate([rgb, np.where(mask, 255, 0)[..., None]], axis=-1)
    return rgba.astype(np.uint8)


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1) * 255.0


def write_depth_png(path, depth: np.ndarray, mask: np.ndarray, z_min: float, z_max: float) -> None:
    Image.fromarray(depth_to_rgba(depth, mask, z_min, z_max), mode="RGBA").save(path)


def write_confidence_png(path, c_norm: np.ndarray) -> None:
    """Negated grayscale confidence: bright = small, dark = large."""
    img = (255.0 - np.clip(c_norm, 0.0, 255.0)).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)


def projection_to_rgb(proj: np.ndarray) -> np.ndarray:
    """Pseudo-color a max-projection from blue (low) to yellow (high)."""
    top = float(proj.max())
    s = proj / top if top > 0 else np.zeros_like(proj, dtype=np.float64)
    rgb = np.stack([s * 255.0, s * 255.0, (1.0 - s) * 255.0], axis=-1)
    return rgb.astype(np.uint8)


def write_projection_png(path, proj: np.ndarray) -> None:
    Image.fromarray(projection_to_rgb(proj), mode="RGB").save(path)


# -- calibration ------------------------------------------------------------


def _pose_to_json(p: Pose) -> dict:
    return {
        "rotation_xyzw": [float(v) for v in p.quaternion_xyzw()],
        "translation": [float(v) for v in p.translation],
    }


def _pose_from_json(d: dict, where: str) -> Pose:
    extra = set(d) - {"rotation_xyzw", "translation"}
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return Pose.from_quaternion_xyzw(d["rotation_xyzw"], d["translation"])
    except KeyError as exc:
        raise ConfigurationError(f"{where}: missing key {exc}") from None


_CAMERA_KEYS = {"name", "width", "height", "fx", "fy", "cx", "cy", "distortion", "camera_from_rig"}


def write_calibration(path, rig: RigConfig) -> None:
    """Calibration JSON: per-camera intrinsics, distortion, camera-from-rig extrinsics."""
    cameras = []
    for i, (cam, ext) in enumerate(zip(rig.cameras, rig.extrinsics)):
        cameras.append(
            {
                "name": f"cam{i}",
                "width": cam.width,
                "height": cam.height,
                "fx": cam.fx,
                "fy": cam.fy,
                "cx": cam.cx,
                "cy": cam.cy,
                "distortion": [float(v) for v in cam.distortion],
                "camera_from_rig": _pose_to_json(ext.inverse()),
            }
        )
    with open(path, "w") as f:
        json.dump({"cameras": cameras}, f, indent=2)
        f.write("\n")


def read_calibration(path) -> tuple[list[CameraModel], list[Pose]]:
    """Load calibration JSON; returns (camera models, rig-from-camera extrinsics)."""
    with open(path) as f:
        doc = json.load(f)
    if set(doc) != {"cameras"} or not isinstance(doc["cameras"], list) or not doc["cameras"]:
        raise ConfigurationError(f"{path}: calibration must hold a non-empty 'cameras' list")
    cams, exts = [], []
    for i, c in enumerate(doc["cameras"]):
        where = f"{path}: cameras[{i}]"
        extra = set(c) - _CAMERA_KEYS
        if extra:
            raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
        try:
            cams.append(
                CameraModel(
                    float(c["fx"]), float(c["fy"]), float(c["cx"]), float(c["cy"]),
                    int(c["width"]), int(c["height"]),
                    np.asarray(c.get("distortion", [0, 0, 0, 0, 0]), dtype=np.float64),
                )
            )
        except KeyError as exc:
            raise ConfigurationError(f"{where}: missing key {exc}") from None
        cam_from_rig = _pose_from_json(
            c.get("camera_from_rig", {"rotation_xyzw": [0, 0, 0, 1], "translation": [0, 0, 0]}),
            f"{where}.camera_from_rig",
        )
        exts.append(cam_from_rig.inverse())
    return cams, exts


# -- scene / simulation configs ----------------------------------------------

_SCENE_KEYS = {"planes", "segments", "segment_grids"}
_PLANE_KEYS = {"origin", "normal", "half_extent", "texture"}
_TEXTURE_KEYS = {"amplitudes", "frequencies", "angles", "phases"}
_GRID_KEYS = {"z", "half_width", "half_height", "n_lines"}


def scene_from_json(doc: dict, where: str = "scene") -> Scene:
    extra = set(doc) - _SCENE_KEYS
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    planes = []
    for i, p in enumerate(doc.get("planes", [])):
        pextra = set(p) - _PLANE_KEYS
        if pextra:
            raise ConfigurationError(f"{where}.planes[{i}]: unknown keys {sorted(pextra)}")
        texture = None
        if p.get("texture") is not None:
            t = p["texture"]
            textra = set(t) - _TEXTURE_KEYS
            if textra:
                raise ConfigurationError(f"{where}.planes[{i}].texture: unknown keys {sorted(textra)}")
            missing = {"amplitudes", "frequencies", "angles", "phases"} - set(t)
            if missing:
                raise ConfigurationError(
                    f"{where}.planes[{i}].texture: missing keys {sorted(missing)}"
                )
            texture = SinusoidTexture(
                np.asarray(t["amplitudes"]), np.asarray(t["frequencies"]),
                np.asarray(t["angles"]), np.asarray(t["phases"]),
            )
        planes.append(
            PlanePatch(
                np.asarray(p["origin"], dtype=np.float64),
                np.asarray(p.get("normal", [0, 0, 1]), dtype=np.float64),
                tuple(p.get("half_extent", (1.0, 1.0))),
                texture,
            )
        )
    segments = []
    if doc.get("segments"):
        try:
            segments.append(np.asarray(doc["segments"], dtype=np.float64).reshape(-1, 2, 3))
        except ValueError:
            raise ConfigurationError(
                f"{where}: segments must be an (n, 2, 3) nest of endpoint pairs"
            ) from None
    for i, g in enumerate(doc.get("segment_grids", [])):
        gextra = set(g) - _GRID_KEYS
        if gextra:
            raise ConfigurationError(f"{where}.segment_grids[{i}]: unknown keys {sorted(gextra)}")
        segments.append(
            grid_plane_segments(
                float(g.get("z", 2.0)), float(g.get("half_width", 1.2)),
                float(g.get("half_height", 0.8)), int(g.get("n_lines", 9)),
            )
        )
    segs = np.concatenate(segments) if segments else None
    return Scene(segments=segs, planes=planes)


_RIG_KEYS = {"n_cameras", "baseline", "width", "height", "focal", "speed", "duration", "theta"}


def rig_from_json(doc: dict, where: str = "rig") -> RigConfig:
    extra = set(doc) - _RIG_KEYS
    if extra:
        raise ConfigurationError(f"{where}: unknown keys {sorted(extra)}")
    return default_rig_from_kwargs(**doc)


def default_rig_from_kwargs(**kwargs) -> RigConfig:
    return default_rig(
        n_cameras=int(kwargs.get("n_cameras", 2)),
        baseline=float(kwargs.get("baseline", 0.2)),
        width=int(kwargs.get("width", 240)),
        height=int(kwargs.get("height", 180)),
        focal=float(kwargs.get("focal", 200.0)),
        speed=float(kwargs.get("speed", 0.5)),
        duration=float(kwargs.get("duration", 1.0)),
        theta=float(kwargs.get("theta", 0.2)),
    )
