import json

import numpy as np
import pytest

from evdepth import (
    ConfigurationError,
    DepthResult,
    aggregate_reports,
    depth_errors,
    pr_counts,
    pr_curves,
    pr_rows_from_counts,
    reports_to_json,
    reports_to_table,
)


def result_from(est, mask=None):
    est = np.asarray(est, dtype=float)
    if mask is None:
        mask = np.isfinite(est)
    return DepthResult(est, np.ones_like(est), np.asarray(mask, bool), (0.1, 10.0))


def three_pixel_case():
    gt = np.array([[1.0, 2.0, 4.0]])
    est = result_from(np.array([[1.1, 2.0, 3.0]]))
    return est, gt


def test_three_pixel_oracle_exact():
    est, gt = three_pixel_case()
    rep = depth_errors(est, gt)
    assert rep.n_points == 3
    assert abs(rep.mean_abs_err - (0.1 + 0.0 + 1.0) / 3.0) < 1e-12
    assert abs(rep.median_abs_err - 0.1) < 1e-12
    # only the third pixel exceeds both 0.3 m and 5 percent
    assert abs(rep.bad_pix - 100.0 / 3.0) < 1e-12
    d = np.log([1.1, 2.0, 3.0]) - np.log([1.0, 2.0, 4.0])
    want_silog = 100.0 * (np.mean(d**2) - np.mean(d) ** 2)
    assert abs(rep.silog - want_silog) < 1e-12
    want_rel = 100.0 * np.mean([0.1 / 1.0, 0.0, 1.0 / 4.0])
    assert abs(rep.aerr_rel - want_rel) < 1e-12
    want_lrmse = 100.0 * np.sqrt(np.mean(d**2))
    assert abs(rep.log_rmse - want_lrmse) < 1e-12
    ratio = np.maximum([1.1, 1.0, 4.0 / 3.0], [1 / 1.1, 1.0, 3.0 / 4.0])
    for k, attr in enumerate(["delta1", "delta2", "delta3"], start=1):
        want = 100.0 * np.mean(ratio < 1.25**k)
        assert abs(getattr(rep, attr) - want) < 1e-12


def test_silog_is_scale_invariant():
    rng = np.random.default_rng(0)
    gt = rng.uniform(1.0, 5.0, (8, 8))
    est = result_from(gt * rng.uniform(0.8, 1.2, (8, 8)))
    a = depth_errors(est, gt).silog
    scaled = result_from(est.depth * 7.0)
    b = depth_errors(scaled, gt * 7.0).silog
    assert a == pytest.approx(b, abs=1e-9)


def test_delta_is_symmetric():
    rng = np.random.default_rng(1)
    gt = rng.uniform(1.0, 5.0, (8, 8))
    est_vals = gt * rng.uniform(0.7, 1.4, (8, 8))
    fwd = depth_errors(result_from(est_vals), gt)
    rev = depth_errors(result_from(gt), est_vals)
    for attr in ("delta1", "delta2", "delta3"):
        assert getattr(fwd, attr) == pytest.approx(getattr(rev, attr), abs=1e-12)


def test_overlap_masking_ignores_junk_outside_gt():
    gt = np.full((4, 4), np.nan)
    gt[0, 0] = 2.0
    est = np.full((4, 4), 99.0)  # junk everywhere
    est[0, 0] = 2.0
    rep = depth_errors(result_from(est), gt)
    assert rep.n_points == 1
    assert rep.mean_abs_err == 0.0


def test_no_overlap_report():
    gt = np.full((2, 2), np.nan)
    rep = depth_errors(result_from(np.full((2, 2), 1.0)), gt)
    assert rep.no_overlap
    assert rep.n_points == 0


def test_max_depth_filters_gt():
    gt = np.array([[1.0, 50.0]])
    est = result_from(np.array([[1.0, 50.0]]))
    rep = depth_errors(est, gt, max_depth=10.0)
    assert rep.n_points == 1


def test_shape_mismatch_rejected():
    gt = np.zeros((2, 3))
    with pytest.raises(ConfigurationError):
        depth_errors(result_from(np.zeros((3, 2))), gt)


def test_pr_curves_hand_case():
    gt = np.array([[1.0, 2.0, 4.0, 8.0]])
    est = np.array([[1.05, 2.5, np.nan, np.nan]])
    rows = pr_curves(result_from(est), gt, thresholds=[0.1, 1.0])
    # est pixels with GT: 2; |err| = 0.05, 0.5; gt pixels: 4
    assert rows[0]["precision"] == pytest.approx(50.0)
    assert rows[0]["recall"] == pytest.approx(25.0)
    assert rows[1]["precision"] == pytest.approx(100.0)
    assert rows[1]["recall"] == pytest.approx(50.0)
    f1 = rows[1]["f1"]
    assert f1 == pytest.approx(2 * 100 * 50 / 150.0)


def test_pr_counts_pool_exactly():
    gt = np.array([[1.0, 2.0]])
    est_a = result_from(np.array([[1.0, np.nan]]))
    est_b = result_from(np.array([[np.nan, 2.5]]))
    h1, m1, g1 = pr_counts(est_a, gt, [0.1])
    h2, m2, g2 = pr_counts(est_b, gt, [0.1])
    rows = pr_rows_from_counts([0.1], h1 + h2, m1 + m2, g1 + g2)
    assert rows[0]["precision"] == pytest.approx(50.0)
    assert rows[0]["recall"] == pytest.approx(25.0)


def test_pr_no_estimates_gives_none_precision():
    gt = np.array([[1.0]])
    est = result_from(np.array([[np.nan]]))
    rows = pr_curves(est, gt, [0.1])
    assert rows[0]["precision"] is None
    assert rows[0]["f1"] is None
    assert rows[0]["recall"] == 0.0


def test_pr_threshold_validation():
    gt = np.array([[1.0]])
    est = result_from(np.array([[1.0]]))
    for bad in ([], [0.0], [0.2, 0.1], [-1.0]):
        with pytest.raises(ConfigurationError):
            pr_curves(est, gt, bad)


def test_aggregate_pooled_median_is_exact():
    gt1 = np.array([[1.0, 1.0, 1.0]])
    gt2 = np.array([[1.0, 1.0]])
    r1 = depth_errors(result_from(np.array([[1.1, 1.2, 1.3]])), gt1)
    r2 = depth_errors(result_from(np.array([[1.4, 1.5]])), gt2)
    agg = aggregate_reports([r1, r2])
    assert not agg.median_is_approximate
    # pooled abs errors: 0.1 0.2 0.3 0.4 0.5 -> median 0.3
    assert agg.median_abs_err == pytest.approx(0.3, abs=1e-12)
    assert agg.n_points == 5
    want_mean = np.mean([0.1, 0.2, 0.3, 0.4, 0.5])
    assert agg.mean_abs_err == pytest.approx(want_mean, abs=1e-12)


def test_aggregate_without_samples_is_flagged():
    gt = np.array([[1.0, 1.0]])
    r1 = depth_errors(result_from(np.array([[1.1, 1.2]])), gt, keep_samples=False)
    r2 = depth_errors(result_from(np.array([[1.3, 1.4]])), gt, keep_samples=False)
    agg = aggregate_reports([r1, r2])
    assert agg.median_is_approximate


def test_reports_render_table_and_json():
    est, gt = three_pixel_case()
    rep = depth_errors(est, gt)
    table = reports_to_table([("toy", rep)])
    assert "toy" in table
    doc = json.loads(reports_to_json([("toy", rep)]))
    assert doc["toy"]["n_points"] == 3
    assert "abs_errors" not in doc["toy"]
