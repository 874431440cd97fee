"""End-to-end acceptance checks.

Every test prints one "criterion NN: PASS/FAIL" line (use pytest -s to see the
lines for passing runs too) and then asserts, so failures both show up in the
printed ledger and fail the suite. Numeric budgets live next to each check.
"""
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from evdepth import (
    CameraModel,
    DepthResult,
    FusionFunction,
    FusionScheme,
    Pose,
    ReferenceView,
    RobustMaxAccumulator,
    Scene,
    agt_mask,
    apply_mask,
    apply_scheme,
    build_grid_matrix,
    concatenate,
    default_reference_view,
    default_rig,
    depth_errors,
    extract_depth_confidence,
    fuse_arrays,
    fuse_grid_matrix,
    generate_events_geometric,
    generate_events_photometric,
    grid_plane_segments,
    homography_for_plane,
    inverse_depth_planes,
    median_filter,
    morph_fill,
    normalize_confidence,
    parse_scheme,
    pr_counts,
    relative_pose,
    render_gt_depth,
    run_bench,
    warp_event_normalized,
)
from evdepth.simulator import PlanePatch, SinusoidTexture

ORDERED_FNS = [
    FusionFunction.MIN,
    FusionFunction.HARMONIC,
    FusionFunction.GEOMETRIC,
    FusionFunction.ARITHMETIC,
    FusionFunction.RMS,
    FusionFunction.MAX,
]

STEREO_SCHEMES = ["minc*At", "Hc*At", "Gc*At", "Ac*At", "RMSc*At", "maxc*At"]


def _verdict(num: int, ok: bool, detail: str) -> bool:
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def _postprocess(grid, agt_offset: float):
    res = extract_depth_confidence(grid)
    robust = RobustMaxAccumulator()
    robust.add(res.confidence)
    c_norm = normalize_confidence(res.confidence, robust.value())
    res = apply_mask(res, agt_mask(c_norm, offset=agt_offset))
    return median_filter(res)


def _stereo_context(scene, rig, duration, samples_per_edge, seed=0, noise_rate=0.0):
    streams = generate_events_geometric(
        scene, rig, duration, samples_per_edge=samples_per_edge,
        seed=seed, noise_rate=noise_rate,
    )
    cams = rig.cameras
    trajs = [rig.camera_trajectory(i) for i in range(rig.n_cameras)]
    t0 = min(float(s.t[0]) for s in streams if len(s))
    t1 = max(float(s.t[-1]) for s in streams if len(s))
    ref = default_reference_view(trajs, cams, 0.5 * (t0 + t1))
    return streams, cams, trajs, (t0, t1), ref


# -- criterion 1: ordering of the six means on bulk random pairs ---------------


def test_criterion_01_mean_ordering_bulk():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 100_000
    u = rng.uniform(0.1, 10.0, n)
    v = rng.uniform(0.1, 10.0, n)
    eq = rng.random(n) < 0.01
    v = v.copy()
    v[eq] = u[eq]
    outs = [fuse_arrays(fn, [u, v]) for fn in ORDERED_FNS]

    tol = 1e-12
    scale = np.maximum.reduce([np.abs(o) for o in outs])
    ordered = all(
        bool(np.all(a <= b + tol * np.maximum(scale, 1.0)))
        for a, b in zip(outs, outs[1:])
    )
    # equal inputs collapse the whole chain onto the common value
    collapse = all(
        bool(np.all(np.abs(o[eq] - u[eq]) <= tol * np.maximum(u[eq], 1.0)))
        for o in outs
    )
    # distinct inputs keep every link strict
    neq = ~eq & (np.abs(u - v) > 1e-9)
    strict = all(bool(np.all(a[neq] < b[neq])) for a, b in zip(outs, outs[1:]))
    elapsed = time.perf_counter() - started

    ok = ordered and collapse and strict and elapsed < 1.0
    detail = (
        f"{n} pairs ordered={ordered} equality-collapse={collapse} "
        f"strict-when-distinct={strict} elapsed={elapsed:.3f}s (budget 1s)"
    )
    assert _verdict(1, ok, detail)


# -- criterion 2: harmonic mean of a pair is bounded by [min, 2 min] -----------


def test_criterion_02_harmonic_pair_bounds():
    rng = np.random.default_rng(1)
    n = 100_000
    u = rng.uniform(1e-3, 1e3, n)
    v = rng.uniform(1e-3, 1e3, n)
    h = fuse_arrays(FusionFunction.HARMONIC, [u, v])
    m = np.minimum(u, v)
    lower = bool(np.all(m <= h + 1e-12 * np.maximum(m, 1.0)))
    upper = bool(np.all(h <= 2.0 * m * (1.0 + 1e-12)))
    ok = lower and upper
    assert _verdict(2, ok, f"{n} pairs min<=H={lower} H<=2min={upper} (tol 1e-12)")


# -- criteria 3 and 4: fusion algebra on a real two-camera grid matrix ---------


@pytest.fixture(scope="module")
def grid_matrix():
    rig = default_rig(n_cameras=2, duration=1.0)
    scene = Scene(segments=grid_plane_segments(z=2.0, n_lines=9)[:9], planes=[])
    streams, cams, trajs, window, ref = _stereo_context(scene, rig, 1.0, 120)
    matrix = build_grid_matrix(
        streams, cams, trajs, ref, 60, 1.0, 4.0, window=window, n_s=4
    )
    return matrix


def _rel_diff(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.abs(b).max()), 1e-12)
    return float(np.abs(a.astype(np.float64) - b.astype(np.float64)).max()) / scale


def test_criterion_03_fusion_order_commutes(grid_matrix):
    started = time.perf_counter()
    diffs = {}
    for fn, label in ((FusionFunction.ARITHMETIC, "A"), (FusionFunction.HARMONIC, "H")):
        cam_first = fuse_grid_matrix(FusionScheme(fn, fn, "camera_first", 4), grid_matrix)
        time_first = fuse_grid_matrix(FusionScheme(fn, fn, "time_first", 4), grid_matrix)
        diffs[label] = _rel_diff(cam_first.values, time_first.values)
    elapsed = time.perf_counter() - started
    ok = diffs["A"] < 1e-6 and diffs["H"] < 1e-6 and elapsed < 30.0
    detail = (
        f"2 cameras, n_s=4: rel diff A={diffs['A']:.2e} H={diffs['H']:.2e} "
        f"(tol 1e-6), elapsed={elapsed:.1f}s (budget 30s)"
    )
    assert _verdict(3, ok, detail)


def test_criterion_04_arithmetic_equals_pooled(grid_matrix):
    n_c = len(grid_matrix)
    n_s = len(grid_matrix[0])
    fused = fuse_grid_matrix(
        FusionScheme(FusionFunction.ARITHMETIC, FusionFunction.ARITHMETIC, "camera_first", n_s),
        grid_matrix,
    )
    pooled = np.zeros(fused.values.shape, dtype=np.float64)
    for row in grid_matrix:
        for g in row:
            pooled += g.values
    rel = _rel_diff(fused.values * (n_c * n_s), pooled)
    ok = rel < 1e-5
    assert _verdict(4, ok, f"count-rescaled A-of-A vs pooled: rel diff {rel:.2e} (tol 1e-5)")


# -- criterion 5: homography warp against a brute-force ray-plane oracle -------


def test_criterion_05_warp_oracle():
    rng = np.random.default_rng(42)
    cam = CameraModel(200.0, 200.0, 119.5, 89.5, 240, 180)
    worst = 0.0
    cases = 0
    while cases < 1000:
        event_pose = Pose(Rotation.from_rotvec(rng.normal(0, 0.2, 3)), rng.normal(0, 0.3, 3))
        ref_pose = Pose(Rotation.from_rotvec(rng.normal(0, 0.2, 3)), rng.normal(0, 0.3, 3))
        ref = ReferenceView(ref_pose, cam)
        z = rng.uniform(0.8, 8.0)
        xn = rng.uniform(-0.4, 0.4, 2)

        rel = relative_pose(ref_pose, event_pose)
        direction = rel.rotation.apply(np.array([xn[0], xn[1], 1.0]))
        if abs(direction[2]) < 1e-6:
            continue
        lam = (z - rel.translation[2]) / direction[2]
        if lam <= 0:
            continue
        p = rel.translation + lam * direction
        want = p[:2] / p[2]

        got = warp_event_normalized(xn, homography_for_plane(event_pose, ref, z))
        worst = max(worst, float(np.max(np.abs(got - want))))
        cases += 1
    ok = worst < 1e-9
    assert _verdict(5, ok, f"{cases} random warps, worst |diff| {worst:.2e} (tol 1e-9)")


# -- criterion 6: stereo accuracy on a frontoparallel plane --------------------


def test_criterion_06_stereo_plane_accuracy():
    started = time.perf_counter()
    rig = default_rig(n_cameras=2, baseline=0.2, duration=1.0)
    # vertical stripes only: horizontal edges are parallel to the motion and
    # carry no triangulable signal
    scene = Scene(segments=grid_plane_segments(z=2.0, n_lines=9)[:9], planes=[])
    streams, cams, trajs, window, ref = _stereo_context(scene, rig, 1.0, 240)
    grid = apply_scheme(
        parse_scheme("Hc*At"), streams, cams, trajs, 100, 1.0, 4.0,
        window=window, ref=ref,
    )
    result = _postprocess(grid, agt_offset=-10.0)
    gt = render_gt_depth(scene, ref)
    report = depth_errors(result, gt)

    depths = inverse_depth_planes(100, 1.0, 4.0)
    k = int(np.argmin(np.abs(depths - 2.0)))
    two_bins = float(depths[k + 1] - depths[k - 1])
    elapsed = time.perf_counter() - started
    ok = report.median_abs_err <= two_bins and elapsed < 60.0
    detail = (
        f"median |err| {report.median_abs_err:.4f} m <= 2 bins ({two_bins:.4f} m) "
        f"on {report.n_points} px, elapsed={elapsed:.1f}s (budget 60s)"
    )
    assert _verdict(6, ok, detail)


# -- criterion 7: fusion-function robustness ranking under noise ---------------


def test_criterion_07_noise_ranking():
    # short window keeps the mono camera's own parallax (speed * duration)
    # below the stereo baseline, the regime the ranking claim describes
    duration = 0.075
    rig = default_rig(n_cameras=2, baseline=0.2, duration=duration)
    segs = grid_plane_segments(z=2.0, n_lines=9)[:9]
    scene_events = Scene(segments=segs, planes=[])
    gt_patch = PlanePatch(
        origin=np.array([0.0, 0.0, 2.0]), normal=np.array([0.0, 0.0, 1.0]),
        half_extent=(2.5, 1.2), texture=None,
    )
    scene_gt = Scene(segments=segs, planes=[gt_patch])
    streams, cams, trajs, window, ref = _stereo_context(
        scene_events, rig, duration, 200, seed=0, noise_rate=0.1
    )
    # dense GT makes stray off-structure survivors count as error
    gt = render_gt_depth(scene_gt, ref)

    def run(scheme_text, mono=False):
        if mono:
            grid = apply_scheme(
                parse_scheme(scheme_text), streams[:1], cams[:1], trajs[:1],
                100, 1.0, 4.0, window=window, ref=ref,
            )
        else:
            grid = apply_scheme(
                parse_scheme(scheme_text), streams, cams, trajs,
                100, 1.0, 4.0, window=window, ref=ref,
            )
        result = _postprocess(grid, agt_offset=10.0)
        return depth_errors(result, gt)

    reports = {s: run(s) for s in STEREO_SCHEMES}
    mono = run("At", mono=True)

    means = [reports[s].mean_abs_err for s in STEREO_SCHEMES]
    inversions = sum(1 for a, b in zip(means, means[1:]) if a > b)
    medians_ok = all(
        reports[s].median_abs_err <= mono.median_abs_err for s in STEREO_SCHEMES
    )
    ok = inversions <= 1 and medians_ok
    mean_text = " ".join(f"{s.split('*')[0]}={m:.3f}" for s, m in zip(STEREO_SCHEMES, means))
    detail = (
        f"mean |err| {mean_text}; adjacent inversions {inversions} (allow 1); "
        f"stereo medians <= mono ({mono.median_abs_err:.3f} m): {medians_ok}"
    )
    assert _verdict(7, ok, detail)


# -- criterion 8: temporal shuffling degrades gracefully -----------------------


def test_criterion_08_shuffle_robustness():
    rig = default_rig(n_cameras=2, duration=1.0)
    # plane depth between two grid planes so quantization gives every variant
    # a real nonzero median
    scene = Scene(segments=grid_plane_segments(z=1.985, n_lines=9)[:9], planes=[])
    streams, cams, trajs, window, ref = _stereo_context(scene, rig, 1.0, 200)
    gt = render_gt_depth(scene, ref)

    def run(shuffle):
        grid = apply_scheme(
            parse_scheme("At*Hc", n_s=4, shuffle=shuffle), streams, cams, trajs,
            100, 1.0, 4.0, window=window, ref=ref,
        )
        result = _postprocess(grid, agt_offset=10.0)
        return depth_errors(result, gt), result.mask

    base_report, base_mask = run("off")
    shuf_report, shuf_mask = run("cyclic")
    iou = float((base_mask & shuf_mask).sum()) / max(1, int((base_mask | shuf_mask).sum()))
    ratio = shuf_report.median_abs_err / max(base_report.median_abs_err, 1e-12)
    ok = shuf_report.median_abs_err <= 2.0 * base_report.median_abs_err and iou >= 0.70
    detail = (
        f"median shuffled {shuf_report.median_abs_err:.4f} vs off "
        f"{base_report.median_abs_err:.4f} (ratio {ratio:.2f}, allow 2.0); "
        f"mask IoU {iou:.3f} (need 0.70)"
    )
    assert _verdict(8, ok, detail)


# -- criterion 9: wallclock scaling ---------------------------------------------


def test_criterion_09_bench_scaling(tmp_path):
    started = time.perf_counter()
    summary = run_bench(out_dir=tmp_path, quick=True, reps=5, cv_budget=0.1)
    elapsed = time.perf_counter() - started
    checks = summary["checks"]
    all_passed = all(c["passed"] for c in checks.values())
    ok = all_passed and elapsed < 300.0
    parts = []
    for name, c in checks.items():
        value = c.get("r2", c.get("ratio"))
        parts.append(f"{name}={'ok' if c['passed'] else 'FAIL'}({value:.3f})")
    detail = f"{'; '.join(parts)}; elapsed={elapsed:.0f}s (budget 300s)"
    assert _verdict(9, ok, detail)


# -- criterion 10: metric definitions against a hand-computed oracle -----------


def test_criterion_10_metric_oracle():
    gt = np.array([[1.0, 2.0, 4.0]])
    est = DepthResult(
        np.array([[1.1, 2.0, 3.0]]), np.ones((1, 3)), np.ones((1, 3), bool), (0.1, 10.0)
    )
    rep = depth_errors(est, gt)
    mean_ok = abs(rep.mean_abs_err - 1.1 / 3.0) < 1e-12
    median_ok = abs(rep.median_abs_err - 0.1) < 1e-12
    d = np.log([1.1, 2.0, 3.0]) - np.log([1.0, 2.0, 4.0])
    silog_ok = abs(rep.silog - 100.0 * (np.mean(d**2) - np.mean(d) ** 2)) < 1e-12

    rng = np.random.default_rng(3)
    gt2 = rng.uniform(1.0, 5.0, (16, 16))
    est2_vals = gt2 * rng.uniform(0.8, 1.25, (16, 16))
    est2 = DepthResult(est2_vals, np.ones_like(gt2), np.ones_like(gt2, bool), (0.1, 10.0))
    scaled = DepthResult(est2_vals * 3.7, np.ones_like(gt2), np.ones_like(gt2, bool), (0.1, 40.0))
    silog_inv = abs(depth_errors(est2, gt2).silog - depth_errors(scaled, gt2 * 3.7).silog) < 1e-9

    fwd = depth_errors(est2, gt2)
    rev = depth_errors(
        DepthResult(gt2, np.ones_like(gt2), np.ones_like(gt2, bool), (0.1, 10.0)), est2_vals
    )
    delta_sym = all(
        abs(getattr(fwd, a) - getattr(rev, a)) < 1e-12 for a in ("delta1", "delta2", "delta3")
    )
    ok = mean_ok and median_ok and silog_ok and silog_inv and delta_sym
    detail = (
        f"3-pixel oracle mean/median/silog exact to 1e-12: "
        f"{mean_ok}/{median_ok}/{silog_ok}; silog scale-invariant: {silog_inv}; "
        f"delta symmetric: {delta_sym}"
    )
    assert _verdict(10, ok, detail)


# -- criterion 11: morphological fill grows support without degrading depth ----


def test_criterion_11_morph_fill_tradeoff():
    rig = default_rig(n_cameras=2, duration=1.0)
    segs = grid_plane_segments(z=2.0, n_lines=9)[:9]
    gt_patch = PlanePatch(
        origin=np.array([0.0, 0.0, 2.0]), normal=np.array([0.0, 0.0, 1.0]),
        half_extent=(2.5, 1.2), texture=None,
    )
    scene_events = Scene(segments=segs, planes=[])
    scene_gt = Scene(segments=segs, planes=[gt_patch])
    # sparse edge sampling leaves gaps along the stripes for the fill to close
    streams, cams, trajs, window, ref = _stereo_context(scene_events, rig, 1.0, 40)
    gt = render_gt_depth(scene_gt, ref)
    grid = apply_scheme(
        parse_scheme("Hc*At"), streams, cams, trajs, 100, 1.0, 4.0,
        window=window, ref=ref,
    )
    base = _postprocess(grid, agt_offset=10.0)
    filled = morph_fill(base)
    rep_base = depth_errors(base, gt)
    rep_filled = depth_errors(filled, gt)

    growth = filled.point_count() / max(base.point_count(), 1)
    med_change = abs(rep_filled.median_abs_err - rep_base.median_abs_err) / max(
        rep_base.median_abs_err, 1e-12
    )
    ok = growth >= 2.5 and med_change < 0.05
    detail = (
        f"points {base.point_count()} -> {filled.point_count()} (x{growth:.2f}, need 2.5); "
        f"median {rep_base.median_abs_err:.4f} -> {rep_filled.median_abs_err:.4f} "
        f"({100 * med_change:.1f}% change, allow 5%)"
    )
    assert _verdict(11, ok, detail)


# -- criterion 12: contrast threshold sweep -------------------------------------


def test_criterion_12_theta_sweep():
    duration = 0.4
    rig = default_rig(n_cameras=2, duration=duration)
    cams = rig.cameras
    trajs = [rig.camera_trajectory(i) for i in range(2)]
    ref = default_reference_view(trajs, cams, 0.5 * duration)

    # quadrant tiles at a shared depth with halving log-intensity swing:
    # raising the threshold silences the weak-contrast tiles one by one, the
    # way weakly textured surfaces drop out of a real scene
    swings = [1.0, 0.5, 0.25, 0.12]
    origins = [(-0.7, -0.45), (0.7, -0.45), (-0.7, 0.45), (0.7, 0.45)]
    tiles = [
        PlanePatch(
            origin=np.array([ox, oy, 2.0]), half_extent=(0.7, 0.45),
            texture=SinusoidTexture(amplitudes=np.array([0.62, 0.38]) * swing),
        )
        for swing, (ox, oy) in zip(swings, origins)
    ]
    gt = render_gt_depth(Scene(planes=tiles), ref)
    thetas = [0.05, 0.1, 0.2, 0.4, 0.8]

    counts, points, recalls = [], [], []
    for theta in thetas:
        per_cam = [[] for _ in range(rig.n_cameras)]
        for tile in tiles:
            tile_streams = generate_events_photometric(
                Scene(planes=[tile]), rig, theta=theta, duration=duration
            )
            for ci, s in enumerate(tile_streams):
                per_cam[ci].append(s)
        streams = [concatenate(ss) for ss in per_cam]
        counts.append(sum(len(s) for s in streams))
        if counts[-1] == 0:
            points.append(0)
            recalls.append(0.0)
            continue
        grid = apply_scheme(
            parse_scheme("Hc*At"), streams, cams, trajs, 50, 1.0, 4.0,
            window=(0.0, duration), ref=ref,
        )
        result = _postprocess(grid, agt_offset=-10.0)
        points.append(result.point_count())
        hits, _, n_gt = pr_counts(result, gt, [0.2])
        recalls.append(float(hits[0]) / max(n_gt, 1))

    events_mono = all(a >= b for a, b in zip(counts, counts[1:]))
    points_mono = all(a >= b for a, b in zip(points, points[1:]))
    recall_mono = all(a >= b - 1e-12 for a, b in zip(recalls, recalls[1:]))
    nonvacuous = counts[0] > 0 and points[0] > 0 and recalls[0] > 0
    ok = events_mono and points_mono and recall_mono and nonvacuous
    detail = (
        f"theta {thetas}: events {counts} non-increasing={events_mono}; "
        f"points {points} non-increasing={points_mono}; "
        f"recall {[f'{r:.3f}' for r in recalls]} non-increasing={recall_mono}"
    )
    assert _verdict(12, ok, detail)
