import json

import numpy as np
import pytest

from evdepth import (
    ConfigurationError,
    DataError,
    default_rig,
    depth_to_rgba,
    load_depth_map,
    read_calibration,
    read_pfm,
    read_ply_points,
    scene_from_json,
    write_calibration,
    write_pfm,
    write_ply,
)


def test_pfm_round_trip_with_nans(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.uniform(0.5, 5.0, (13, 17)).astype(np.float32)
    data[3, 4] = np.nan
    path = tmp_path / "depth.pfm"
    write_pfm(path, data)
    back = read_pfm(path)
    assert back.shape == data.shape
    assert np.isnan(back[3, 4])
    good = ~np.isnan(data)
    assert np.array_equal(back[good], data[good])


def test_pfm_header_is_bottom_up_little_endian(tmp_path):
    data = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "t.pfm"
    write_pfm(path, data)
    raw = path.read_bytes()
    header, dims, scale = raw.split(b"\n", 2)[0], raw.split(b"\n")[1], raw.split(b"\n")[2]
    assert header == b"Pf"
    assert dims == b"3 2"
    assert float(scale) < 0  # negative scale marks little-endian
    # last row of the array is written first (bottom-up)
    payload = raw.split(b"\n", 3)[3]
    first_row = np.frombuffer(payload[:12], dtype="<f4")
    assert np.array_equal(first_row, data[1])


def test_load_depth_map_rejects_unknown_extension(tmp_path):
    p = tmp_path / "depth.xyz"
    p.write_text("nope")
    with pytest.raises(Exception):
        load_depth_map(p)


def test_ply_round_trip(tmp_path):
    pts = np.array([[0.0, 1.0, 2.0], [3.5, -1.25, 0.75]])
    path = tmp_path / "cloud.ply"
    write_ply(path, pts)
    back = read_ply_points(path)
    assert np.allclose(back, pts, atol=1e-6)
    text = path.read_text()
    assert text.startswith("ply")
    assert "format ascii" in text


def test_calibration_round_trip(tmp_path):
    rig = default_rig(n_cameras=2, baseline=0.2)
    path = tmp_path / "calib.json"
    write_calibration(path, rig)
    cams, extrinsics = read_calibration(path)
    assert len(cams) == 2
    assert cams[0].matches(rig.cameras[0])
    assert np.allclose(extrinsics[1].translation, [0.2, 0.0, 0.0], atol=1e-12)
    doc = json.loads(path.read_text())
    assert "cameras" in doc


def test_calibration_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"cameras": [{"fx": -1}]}))
    with pytest.raises(ConfigurationError):
        read_calibration(path)


def test_depth_to_rgba_valid_range():
    depth = np.array([[1.0, 2.5, 4.0]])
    mask = np.array([[True, True, False]])
    rgba = depth_to_rgba(depth, mask, 1.0, 4.0)
    assert rgba.shape == (1, 3, 4)
    assert rgba.dtype == np.uint8
    assert rgba[0, 0, 3] == 255 and rgba[0, 1, 3] == 255
    assert rgba[0, 2, 3] == 0  # masked-out pixel is transparent
    assert not np.array_equal(rgba[0, 0, :3], rgba[0, 1, :3])


def test_scene_from_json_segments_and_planes():
    doc = {
        "segments": [[[0, 0, 2], [1, 0, 2]]],
        "planes": [
            {
                "origin": [0, 0, 2],
                "normal": [0, 0, 1],
                "half_extent": [1.0, 0.5],
                "texture": {
                    "amplitudes": [0.5],
                    "frequencies": [3.0],
                    "angles": [0.0],
                    "phases": [0.0],
                },
            }
        ],
    }
    scene = scene_from_json(doc)
    assert scene.segments.shape == (1, 2, 3)
    assert len(scene.planes) == 1
    assert scene.planes[0].texture is not None


def test_scene_from_json_rejects_unknown_shape():
    with pytest.raises(ConfigurationError):
        scene_from_json({"segments": [[0, 0, 2]]})
    with pytest.raises(ConfigurationError):
        scene_from_json({"bogus": 1})
    with pytest.raises(ConfigurationError):
        scene_from_json(
            {"planes": [{"origin": [0, 0, 2], "texture": {"amplitudes": [1.0]}}]}
        )
