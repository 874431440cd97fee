import numpy as np
import pytest

from evdepth import (
    ConfigurationError,
    Packet,
    crop_time,
    inverse_depth_planes,
    max_projections,
    new_grid,
    plane_depths_for,
    read_grid_dump,
    sweep_events,
    write_grid_dump,
)
from evdepth.dsi import bilinear_vote


def test_inverse_depth_planes_endpoints_and_spacing():
    d = inverse_depth_planes(100, 1.0, 4.0)
    assert d[0] == pytest.approx(1.0, abs=0)
    assert d[-1] == pytest.approx(4.0, abs=0)
    inv = 1.0 / d
    steps = np.diff(inv)
    assert np.allclose(steps, steps[0], atol=1e-12)
    # plane 0 is the nearest depth
    assert np.all(np.diff(d) > 0)


def test_three_plane_grid_middle_depth():
    d = inverse_depth_planes(3, 1.0, 4.0)
    assert np.allclose(d, [1.0, 1.6, 4.0], atol=1e-12)


def test_plane_depths_for_linear():
    d = plane_depths_for("linear", 5, 1.0, 3.0)
    assert np.allclose(d, np.linspace(1.0, 3.0, 5), atol=0)
    with pytest.raises(ConfigurationError):
        plane_depths_for("quadratic", 5, 1.0, 3.0)


def test_plane_count_validation():
    with pytest.raises(ConfigurationError):
        inverse_depth_planes(1, 1.0, 4.0)
    with pytest.raises(ConfigurationError):
        inverse_depth_planes(10, 4.0, 1.0)
    with pytest.raises(ConfigurationError):
        inverse_depth_planes(10, 0.0, 4.0)


def test_bilinear_vote_weights(stereo_setup):
    grid = new_grid(stereo_setup["ref"], 4, 1.0, 4.0)
    deposited = bilinear_vote(grid, 1, (3.25, 5.75))
    assert deposited == pytest.approx(1.0, abs=1e-12)
    plane = grid.values[1]
    assert plane[5, 3] == pytest.approx(0.75 * 0.25, abs=1e-7)   # (x0, y0)
    assert plane[5, 4] == pytest.approx(0.25 * 0.25, abs=1e-7)   # (x1, y0)
    assert plane[6, 3] == pytest.approx(0.75 * 0.75, abs=1e-7)   # (x0, y1)
    assert plane[6, 4] == pytest.approx(0.25 * 0.75, abs=1e-7)   # (x1, y1)
    assert grid.total_mass() == pytest.approx(1.0, abs=1e-6)


def test_bilinear_vote_drops_outside_corners(stereo_setup):
    grid = new_grid(stereo_setup["ref"], 4, 1.0, 4.0)
    w = grid.width
    deposited = bilinear_vote(grid, 0, (w - 1 + 0.25, 10.0))
    # the two right corners fall off the raster; only 0.75 weight lands
    assert deposited == pytest.approx(0.75, abs=1e-12)
    assert grid.values[0, 10, w - 1] == pytest.approx(0.75, abs=1e-7)


def test_sweep_mass_matches_votes(stereo_setup):
    s = stereo_setup
    stream = crop_time(s["streams"][0], *s["window"], include_end=True)
    packet = Packet("cam0", float(stream.t[0]), float(stream.t[-1]), stream)
    grid = new_grid(s["ref"], 50, 1.0, 4.0)
    stats = sweep_events(grid, packet, s["cams"][0], s["trajs"][0])
    assert stats.n_events == len(stream)
    assert grid.total_mass() == pytest.approx(stats.n_votes_cast, rel=1e-5)
    # every (event, plane) pair is either cast, dropped at the border, or skipped
    budget = stats.n_votes_cast + stats.n_votes_dropped_bounds + stats.n_skipped_geometry
    assert budget == pytest.approx(len(stream) * 50, rel=1e-9)


def test_sweep_additivity(stereo_setup):
    s = stereo_setup
    stream = crop_time(s["streams"][0], *s["window"], include_end=True)
    half = len(stream) // 2
    a, b = stream.slice(0, half), stream.slice(half, len(stream))
    g_all = new_grid(s["ref"], 30, 1.0, 4.0)
    sweep_events(
        g_all,
        Packet("cam0", float(stream.t[0]), float(stream.t[-1]), stream),
        s["cams"][0], s["trajs"][0],
    )
    g_sum = new_grid(s["ref"], 30, 1.0, 4.0)
    for part in (a, b):
        sweep_events(
            g_sum,
            Packet("cam0", float(part.t[0]), float(part.t[-1]), part),
            s["cams"][0], s["trajs"][0],
        )
    assert np.allclose(g_all.values, g_sum.values, atol=1e-3)


def test_sweep_bitwise_deterministic_across_workers(stereo_setup):
    s = stereo_setup
    stream = crop_time(s["streams"][0], *s["window"], include_end=True)
    packet = Packet("cam0", float(stream.t[0]), float(stream.t[-1]), stream)
    grids = []
    for workers in (1, 4):
        g = new_grid(s["ref"], 40, 1.0, 4.0)
        sweep_events(g, packet, s["cams"][0], s["trajs"][0], workers=workers)
        grids.append(g)
    assert np.array_equal(grids[0].values, grids[1].values)


def test_sweep_peak_sits_at_scene_depth(stereo_setup):
    s = stereo_setup
    stream = crop_time(s["streams"][0], *s["window"], include_end=True)
    packet = Packet("cam0", float(stream.t[0]), float(stream.t[-1]), stream)
    grid = new_grid(s["ref"], 100, 1.0, 4.0)
    sweep_events(grid, packet, s["cams"][0], s["trajs"][0])
    from evdepth import extract_depth_confidence

    res = extract_depth_confidence(grid)
    strong = res.confidence > 0.5 * res.confidence.max()
    # scene plane sits at z=2.0; confident pixels should agree to within a bin
    assert abs(np.median(res.depth[strong]) - 2.0) < 0.05


def test_max_projections_shapes_and_values(stereo_setup):
    grid = new_grid(stereo_setup["ref"], 7, 1.0, 4.0)
    grid.values[3, 10, 20] = 5.0
    proj = max_projections(grid)
    assert proj["front"].shape == (grid.height, grid.width)
    assert proj["top"].shape == (7, grid.width)
    assert proj["side"].shape == (grid.height, 7)
    assert proj["front"][10, 20] == 5.0
    assert proj["top"][3, 20] == 5.0
    assert proj["side"][10, 3] == 5.0


def test_grid_dump_round_trip(tmp_path, stereo_setup):
    grid = new_grid(stereo_setup["ref"], 5, 1.0, 4.0)
    rng = np.random.default_rng(0)
    grid.values[:] = rng.random(grid.values.shape, dtype=np.float32)
    path = tmp_path / "grid.bin"
    write_grid_dump(path, grid)
    values, depths, (z0, z1) = read_grid_dump(path)
    assert np.array_equal(values, grid.values)
    assert np.allclose(depths, grid.plane_depths, atol=1e-6)
    assert (z0, z1) == pytest.approx((1.0, 4.0), abs=1e-6)


def test_grid_alignment_checks(stereo_setup):
    ref = stereo_setup["ref"]
    a = new_grid(ref, 10, 1.0, 4.0)
    assert a.aligned_with(new_grid(ref, 10, 1.0, 4.0))
    assert not a.aligned_with(new_grid(ref, 11, 1.0, 4.0))
    assert not a.aligned_with(new_grid(ref, 10, 1.0, 5.0))
    assert not a.aligned_with(new_grid(ref, 10, 1.0, 4.0, sampling="linear"))
