"""Depth accuracy metrics, precision/recall curves, and report aggregation.

Evaluation is per-pixel: an estimated pixel is compared against the ground
truth at the same coordinate. Ground-truth maps mark missing depth with NaN
(or any non-positive value).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .depth import DepthResult
from .errors import ConfigurationError


@dataclass
class MetricsReport:
    """Point-weighted depth error metrics over one evaluation overlap.

    All fields are None when the overlap is empty (no_overlap reports);
    percentages are in [0, 100]; silog and log_rmse carry the conventional
    x100 scaling.
    """

    n_points: int = 0
    mean_abs_err: float | None = None
    median_abs_err: float | None = None
    bad_pix: float | None = None
    silog: float | None = None
    aerr_rel: float | None = None
    log_rmse: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    delta3: float | None = None
    tau_abs: float = 0.3
    tau_rel: float = 0.05
    median_is_approximate: bool = False
    abs_errors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def no_overlap(self) -> bool:
        return self.n_points == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("abs_errors")
        return d


def _valid_gt(gt: np.ndarray, max_depth: float) -> np.ndarray:
    return np.isfinite(gt) & (gt > 0) & (gt <= max_depth)


def depth_errors(
    est: DepthResult,
    gt: np.ndarray,
    max_depth: float = np.inf,
    tau_abs: float = 0.3,
    tau_rel: float = 0.05,
    keep_samples: bool = True,
) -> MetricsReport:
    """Full metric suite over pixels where both estimate and ground truth exist.

    Error definitions, with e = |Zhat - Z| and d = ln Zhat - ln Z:
    bad_pix counts pixels with e > tau_abs AND e/Z > tau_rel;
    silog = 100*(mean(d^2) - mean(d)^2); log_rmse = 100*sqrt(mean(d^2));
    aerr_rel = 100*mean(e/Z); delta_k = 100*fraction with max(Zhat/Z, Z/Zhat)
    below 1.25^k. An empty overlap yields an explicit no-overlap report.
    """
    if est.depth.shape != gt.shape:
        raise ConfigurationError(f"estimate {est.depth.shape} and GT {gt.shape} shapes differ")
    overlap = est.mask & _valid_gt(gt, max_depth)
    n = int(overlap.sum())
    if n == 0:
        return MetricsReport(n_points=0, tau_abs=tau_abs, tau_rel=tau_rel)
    z_est = est.depth[overlap].astype(np.float64)
    z_gt = gt[overlap].astype(np.float64)
    e = np.abs(z_est - z_gt)
    d = np.log(z_est) - np.log(z_gt)
    rel = e / z_gt
    ratio = np.maximum(z_est / z_gt, z_gt / z_est)
    return MetricsReport(
        n_points=n,
        mean_abs_err=float(e.mean()),
        median_abs_err=float(np.median(e)),
        bad_pix=float(100.0 * np.mean((e > tau_abs) & (rel > tau_rel))),
        silog=float(100.0 * (np.mean(d * d) - np.mean(d) ** 2)),
        aerr_rel=float(100.0 * rel.mean()),
        log_rmse=float(100.0 * math.sqrt(np.mean(d * d))),
        delta1=float(100.0 * np.mean(ratio < 1.25)),
        delta2=float(100.0 * np.mean(ratio < 1.25**2)),
        delta3=float(100.0 * np.mean(ratio < 1.25**3)),
        tau_abs=tau_abs,
        tau_rel=tau_rel,
        abs_errors=e if keep_samples else None,
    )


def _check_thresholds(thresholds) -> np.ndarray:
    thresholds = np.asarray(list(thresholds), dtype=np.float64)
    if len(thresholds) == 0 or np.any(thresholds <= 0) or np.any(np.diff(thresholds) <= 0):
        raise ConfigurationError("thresholds must be strictly increasing and positive")
    return thresholds


def pr_counts(
    est: DepthResult, gt: np.ndarray, thresholds, max_depth: float = np.inf
) -> tuple[np.ndarray, int, int]:
    """Raw counts behind a PR curve: (hits per threshold, n_est_with_gt, n_gt).

    Counts from several evaluations can be summed before forming ratios,
    which pools packets exactly.
    """
    thresholds = _check_thresholds(thresholds)
    gt_valid = _valid_gt(gt, max_depth)
    both = est.mask & gt_valid
    err = np.abs(est.depth[both] - gt[both])
    hits = np.array([(err <= thr).sum() for thr in thresholds], dtype=np.int64)
    return hits, int(both.sum()), int(gt_valid.sum())


def pr_rows_from_counts(thresholds, hits, n_est_with_gt: int, n_gt: int) -> list[dict]:
    rows = []
    for thr, h in zip(thresholds, hits):
        precision = 100.0 * h / n_est_with_gt if n_est_with_gt else None
        recall = 100.0 * h / n_gt if n_gt else 0.0
        if precision is None:
            f1 = None
        elif precision > 0 and recall > 0:
            f1 = 2.0 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        rows.append({"threshold": float(thr), "precision": precision, "recall": recall, "f1": f1})
    return rows


def pr_curves(
    est: DepthResult, gt: np.ndarray, thresholds, max_depth: float = np.inf
) -> list[dict]:
    """Precision/recall/F1 per error threshold.

    Precision: of the estimated pixels that have ground truth, the percentage
    within the threshold. Recall: of all ground-truth pixels, the percentage
    that have an estimate within the threshold. F1 is their harmonic mean, 0
    when both vanish; precision is None when no estimated pixel has ground
    truth.
    """
    thresholds = _check_thresholds(thresholds)
    hits, n_est_with_gt, n_gt = pr_counts(est, gt, thresholds, max_depth)
    return pr_rows_from_counts(thresholds, hits, n_est_with_gt, n_gt)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    return float(v[np.searchsorted(cum, 0.5 * cum[-1])])


def aggregate_reports(reports: list[MetricsReport], weights=None) -> MetricsReport:
    """Point-weighted aggregation of several reports into one.

    Means and percentages are weighted by point counts (or explicit weights).
    The median is pooled from retained error samples when every report kept
    them; otherwise it falls back to a weighted median of medians and the
    result is flagged approximate.
    """
    if not reports:
        raise ConfigurationError("nothing to aggregate")
    if weights is None:
        weights = [r.n_points for r in reports]
    pairs = [(r, wi) for r, wi in zip(reports, weights) if not r.no_overlap]
    if not pairs:
        return MetricsReport(n_points=0, tau_abs=reports[0].tau_abs, tau_rel=reports[0].tau_rel)
    live = [r for r, _ in pairs]
    w = np.asarray([wi for _, wi in pairs], dtype=np.float64)
    total = w.sum()

    def wmean(attr):
        return float(sum(getattr(r, attr) * wi for r, wi in zip(live, w)) / total)

    if all(r.abs_errors is not None for r in live):
        pooled = np.concatenate([r.abs_errors for r in live])
        median = float(np.median(pooled))
        approx = False
    else:
        median = _weighted_median(np.asarray([r.median_abs_err for r in live]), w)
        approx = True
    return MetricsReport(
        n_points=int(sum(r.n_points for r in live)),
        mean_abs_err=wmean("mean_abs_err"),
        median_abs_err=median,
        bad_pix=wmean("bad_pix"),
        silog=wmean("silog"),
        aerr_rel=wmean("aerr_rel"),
        log_rmse=wmean("log_rmse"),
        delta1=wmean("delta1"),
        delta2=wmean("delta2"),
        delta3=wmean("delta3"),
        tau_abs=live[0].tau_abs,
        tau_rel=live[0].tau_rel,
        median_is_approximate=approx,
    )


_TABLE_COLUMNS = [
    ("n_points", "Points", "d"),
    ("mean_abs_err", "Mean Err [m]", ".4f"),
    ("median_abs_err", "Median Err [m]", ".4f"),
    ("bad_pix", "bad-pix [%]", ".2f"),
    ("silog", "SILog [x100]", ".3f"),
    ("aerr_rel", "AErrR [%]", ".2f"),
    ("log_rmse", "log RMSE [x100]", ".3f"),
    ("delta1", "d<1.25 [%]", ".2f"),
    ("delta2", "d<1.25^2 [%]", ".2f"),
    ("delta3", "d<1.25^3 [%]", ".2f"),
]


def reports_to_table(named_reports: list[tuple[str, MetricsReport]]) -> str:
    """Aligned plain-text table, one row per named report."""
    headers = ["Name"] + [h for _, h, _ in _TABLE_COLUMNS]
    rows = []
    for name, r in named_reports:
        row = [name]
        for attr, _, fmt in _TABLE_COLUMNS:
            val = getattr(r, attr)
            row.append("n/a" if val is None else format(val, fmt))
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def reports_to_json(named_reports: list[tuple[str, MetricsReport]]) -> str:
    return json.dumps({name: r.to_dict() for name, r in named_reports}, indent=2) + "\n"


def pr_rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["threshold", "precision", "recall", "f1"])
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
