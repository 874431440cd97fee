"""End-to-end reconstruction driver: files in, depth maps and a manifest out.

Packet windows are derived from the pooled (all-camera) event times so that a
count-based split means total events per packet, then each camera's stream is
cropped to the shared window. The same windows drive ground-truth rendering in
the simulator command, so outputs pair up by index.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .depth import (
    DepthResult,
    RobustMaxAccumulator,
    agt_mask,
    apply_mask,
    extract_depth_confidence,
    median_filter,
    morph_fill,
    normalize_confidence,
    to_point_cloud,
)
from .dsi import max_projections, write_grid_dump
from .errors import ConfigurationError, DataError
from .events import (
    EventStream,
    crop_time,
    parse_event_text,
    parse_trajectory_text,
    write_event_text,
    write_trajectory_text,
)
from .evaluation import (
    aggregate_reports,
    depth_errors,
    pr_counts,
    pr_rows_from_counts,
    pr_rows_to_csv,
    reports_to_json,
    reports_to_table,
)
from .fusion import apply_scheme, default_reference_view, parse_scheme
from .geometry import CameraModel, ReferenceView, Trajectory
from .simulator import (
    RigConfig,
    Scene,
    generate_events_geometric,
    generate_events_photometric,
    render_gt_depth,
)
from .writers import (
    load_depth_map,
    read_calibration,
    write_calibration,
    write_confidence_png,
    write_depth_png,
    write_pfm,
    write_ply,
    write_projection_png,
)

logger = logging.getLogger(__name__)


@dataclass
class LoadedInputs:
    streams: list[EventStream]
    cams: list[CameraModel]
    trajs: list[Trajectory]


def load_inputs(cfg: PipelineConfig) -> LoadedInputs:
    cams, extrinsics = read_calibration(cfg.calibration)
    if len(cfg.events) != len(cams):
        raise ConfigurationError(
            f"{len(cfg.events)} event files but calibration describes {len(cams)} cameras"
        )
    with open(cfg.trajectory) as f:
        rig_traj = parse_trajectory_text(f)
    trajs = [rig_traj.compose_right(ext) for ext in extrinsics]
    streams = []
    for i, (path, cam) in enumerate(zip(cfg.events, cams)):
        with open(path) as f:
            streams.append(
                parse_event_text(
                    f, cam.width, cam.height, camera_id=f"cam{i}",
                    timestamps_in_us=cfg.timestamps_in_us,
                    regression_tolerance=cfg.regression_tolerance,
                )
            )
        logger.info("loaded %d events from %s", len(streams[-1]), path)
    return LoadedInputs(streams, cams, trajs)


def packet_windows(
    streams: list[EventStream],
    packet_count: int | None = None,
    packet_duration: float | None = None,
) -> list[tuple[float, float]]:
    """Half-open packet windows [a, b) over the pooled event times (last closed).

    With packet_count, cuts fall every N pooled events; with packet_duration,
    at fixed time steps (empty windows dropped). Without either, one window
    spans everything.
    """
    alive = [s.t for s in streams if len(s)]
    if not alive:
        raise DataError("no events in any input stream")
    pooled = np.sort(np.concatenate(alive))
    t0, t1 = float(pooled[0]), float(pooled[-1])
    if packet_count is not None:
        n = packet_count
        edge_idx = np.arange(n, pooled.size, n)
        edges = sorted(set([t0] + [float(pooled[i]) for i in edge_idx] + [t1]))
        if len(edges) < 2:
            edges = [t0, t1]
        return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    if packet_duration is not None:
        dur = packet_duration
        windows = []
        a = t0
        while a < t1 or not windows:
            b = min(a + dur, t1)
            lo = np.searchsorted(pooled, a, side="left")
            hi = np.searchsorted(pooled, b, side="left")
            if hi > lo or (b == t1 and pooled.size - lo > 0):
                windows.append((a, b))
            if b >= t1:
                break
            a = b
        return windows
    return [(t0, t1)]


def _postprocess(result: DepthResult, robust_max: float, cfg: PipelineConfig):
    """Shared filtering chain: normalize -> adaptive threshold -> median -> fill."""
    c_norm = normalize_confidence(result.confidence, robust_max)
    mask = agt_mask(c_norm, ksize=cfg.agt_ksize, offset=cfg.agt_offset, sigma=cfg.agt_sigma)
    filtered = apply_mask(result, mask)
    filtered = median_filter(filtered, ksize=cfg.median_ksize,
                             min_neighbors=cfg.median_min_neighbors)
    if cfg.morph_fill:
        filtered = morph_fill(filtered)
    return filtered, c_norm


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_packet_outputs(
    outdir: Path,
    index: int,
    result: DepthResult,
    c_norm: np.ndarray,
    ref: ReferenceView,
    cfg: PipelineConfig,
) -> dict[str, str]:
    """Write one packet's artifacts; returns {filename: sha256}."""
    outputs: dict[str, str] = {}

    def emit(name: str, writer) -> None:
        path = outdir / name
        writer(path)
        outputs[name] = _sha256_file(path)

    emit(f"depth_{index:06d}.pfm", lambda p: write_pfm(p, result.depth))
    if cfg.write_png:
        emit(
            f"depth_{index:06d}.png",
            lambda p: write_depth_png(p, result.depth, result.mask, cfg.z_min, cfg.z_max),
        )
        emit(f"confidence_{index:06d}.png", lambda p: write_confidence_png(p, c_norm))
    if cfg.write_ply:
        emit(f"cloud_{index:06d}.ply", lambda p: write_ply(p, to_point_cloud(result, ref)))
    return outputs


def reconstruct(cfg: PipelineConfig) -> dict:
    """Run the full pipeline described by cfg; returns the run manifest."""
    cfg.validate()
    wall_start = time.perf_counter()
    inputs = load_inputs(cfg)
    windows = packet_windows(inputs.streams, cfg.packet_count, cfg.packet_duration)
    scheme = parse_scheme(cfg.scheme, n_s=cfg.n_s, split=cfg.split, shuffle=cfg.shuffle)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    logger.info("%d packet window(s), scheme %s", len(windows), cfg.scheme)

    robust = RobustMaxAccumulator(cfg.robust_percentile)
    packet_records: list[dict] = []
    pending: list[tuple[int, DepthResult, ReferenceView]] = []

    for pi, (a, b) in enumerate(windows):
        last = pi == len(windows) - 1
        crops = [crop_time(s, a, b, include_end=last) for s in inputs.streams]
        ref = default_reference_view(inputs.trajs, inputs.cams, 0.5 * (a + b),
                                     clamp=cfg.clamp_poses)
        t_sweep = time.perf_counter()
        grid = apply_scheme(
            scheme, crops, inputs.cams, inputs.trajs, cfg.n_z, cfg.z_min, cfg.z_max,
            window=(a, b), ref=ref, clamp=cfg.clamp_poses, workers=cfg.threads,
            sampling=cfg.depth_sampling,
        )
        t_extract = time.perf_counter()
        raw = extract_depth_confidence(grid, subvoxel=cfg.subvoxel)
        robust.add(raw.confidence)
        t_done = time.perf_counter()
        record = {
            "index": pi,
            "window": [a, b],
            "ref_time": 0.5 * (a + b),
            "events_per_camera": [len(c) for c in crops],
            "sweep_stats": {
                "n_events": grid.stats.n_events,
                "votes_cast": grid.stats.n_votes_cast,
                "votes_dropped_bounds": grid.stats.n_votes_dropped_bounds,
                "skipped_geometry": grid.stats.n_skipped_geometry,
            },
            "raw_points": raw.point_count(),
            "timings_s": {
                "sweep_and_fuse": t_extract - t_sweep,
                "extract": t_done - t_extract,
            },
        }
        packet_records.append(record)
        if cfg.robust_mode == "streaming":
            filtered, c_norm = _postprocess(raw, robust.value(), cfg)
            record["outputs"] = _write_packet_outputs(outdir, pi, filtered, c_norm, ref, cfg)
            record["filtered_points"] = filtered.point_count()
            record["timings_s"]["postprocess_and_write"] = time.perf_counter() - t_done
        else:
            pending.append((pi, raw, ref))
        logger.info("packet %d/%d: %d votes, %d raw points",
                    pi + 1, len(windows), grid.stats.n_votes_cast, raw.point_count())

    robust_max = robust.value()
    for pi, raw, ref in pending:
        t_post = time.perf_counter()
        filtered, c_norm = _postprocess(raw, robust_max, cfg)
        record = packet_records[pi]
        record["outputs"] = _write_packet_outputs(outdir, pi, filtered, c_norm, ref, cfg)
        record["filtered_points"] = filtered.point_count()
        record["timings_s"]["postprocess_and_write"] = time.perf_counter() - t_post

    manifest = {
        "kind": "reconstruction",
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg.to_dict(),
        "config_sha256": cfg.sha256(),
        "n_packets": len(windows),
        "robust_max": robust_max,
        "packets": packet_records,
        "total_wall_s": time.perf_counter() - wall_start,
    }
    manifest_path = outdir / "run_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    logger.info("wrote %s", manifest_path)
    return manifest


def project_dsi(cfg: PipelineConfig, packet_index: int = 0, dump: bool = False) -> dict:
    """Build one packet's fused grid and write its three maximum projections."""
    cfg.validate()
    inputs = load_inputs(cfg)
    windows = packet_windows(inputs.streams, cfg.packet_count, cfg.packet_duration)
    if not 0 <= packet_index < len(windows):
        raise ConfigurationError(
            f"packet index {packet_index} outside [0, {len(windows) - 1}]"
        )
    a, b = windows[packet_index]
    last = packet_index == len(windows) - 1
    crops = [crop_time(s, a, b, include_end=last) for s in inputs.streams]
    scheme = parse_scheme(cfg.scheme, n_s=cfg.n_s, split=cfg.split, shuffle=cfg.shuffle)
    ref = default_reference_view(inputs.trajs, inputs.cams, 0.5 * (a + b), clamp=cfg.clamp_poses)
    grid = apply_scheme(
        scheme, crops, inputs.cams, inputs.trajs, cfg.n_z, cfg.z_min, cfg.z_max,
        window=(a, b), ref=ref, clamp=cfg.clamp_poses, workers=cfg.threads,
        sampling=cfg.depth_sampling,
    )
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    projections = max_projections(grid)
    outputs = {}
    for name, proj in projections.items():
        fname = f"projection_{name}_{packet_index:06d}.png"
        write_projection_png(outdir / fname, proj)
        outputs[fname] = {"shape": list(proj.shape), "max": float(proj.max())}
    if dump:
        fname = f"dsi_{packet_index:06d}.bin"
        write_grid_dump(outdir / fname, grid)
        outputs[fname] = {"shape": list(grid.shape)}
    info = {
        "packet": packet_index,
        "window": [a, b],
        "total_mass": grid.total_mass(),
        "outputs": outputs,
    }
    (outdir / f"projection_{packet_index:06d}.json").write_text(json.dumps(info, indent=2))
    return info


def _pair_depth_files(est: Path, gt: Path) -> list[tuple[Path, Path]]:
    for label, p in (("est", est), ("gt", gt)):
        if not p.exists():
            raise DataError(f"{label} path {p} does not exist")
    if est.is_file() and gt.is_file():
        return [(est, gt)]
    if est.is_dir() and gt.is_dir():
        est_files = sorted(p for p in est.iterdir() if p.suffix in (".pfm", ".npy"))
        gt_files = sorted(p for p in gt.iterdir() if p.suffix in (".pfm", ".npy"))
        est_files = [p for p in est_files if p.name.startswith("depth")]
        gt_files = [p for p in gt_files if p.name.startswith("gt")]
        if not est_files or not gt_files:
            raise DataError("no depth_*.pfm / gt_*.pfm pairs found")
        if len(est_files) != len(gt_files):
            raise DataError(
                f"{len(est_files)} estimate maps but {len(gt_files)} ground-truth maps"
            )
        return list(zip(est_files, gt_files))
    raise ConfigurationError("est and gt must both be files or both be directories")


def evaluate_depth(
    est_path,
    gt_path,
    out_dir=None,
    max_depth: float = np.inf,
    tau_abs: float = 0.3,
    tau_rel: float = 0.05,
    thresholds=(0.05, 0.1, 0.2, 0.4),
) -> dict:
    """Compare estimated depth maps against ground truth; returns the report dict.

    Accepts single files or directories (depth_*.pfm paired with gt_*.pfm in
    index order). Precision/recall pools raw counts across pairs.
    """
    pairs = _pair_depth_files(Path(est_path), Path(gt_path))
    reports = []
    hits_total = None
    n_est_total = 0
    n_gt_total = 0
    per_pair = []
    for est_file, gt_file in pairs:
        est_map = load_depth_map(est_file)
        gt_map = load_depth_map(gt_file)
        mask = np.isfinite(est_map)
        est = DepthResult(
            depth=np.where(mask, est_map, np.nan),
            confidence=np.zeros_like(est_map),
            mask=mask,
            z_range=(float(np.nanmin(est_map)) if mask.any() else 0.0,
                     float(np.nanmax(est_map)) if mask.any() else 0.0),
        )
        report = depth_errors(est, gt_map, max_depth=max_depth,
                              tau_abs=tau_abs, tau_rel=tau_rel)
        reports.append(report)
        hits, n_est, n_gt = pr_counts(est, gt_map, thresholds, max_depth=max_depth)
        hits_total = hits if hits_total is None else hits_total + hits
        n_est_total += n_est
        n_gt_total += n_gt
        per_pair.append({"est": est_file.name, "gt": gt_file.name,
                         "report": report.to_dict()})
    combined = aggregate_reports(reports)
    pr_rows = pr_rows_from_counts(np.asarray(thresholds, dtype=float),
                                  hits_total, n_est_total, n_gt_total)
    doc = {
        "kind": "evaluation",
        "n_pairs": len(pairs),
        "combined": combined.to_dict(),
        "pairs": per_pair,
        "pr": pr_rows,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        named = [(p["est"], r) for p, r in zip(per_pair, reports)] + [("combined", combined)]
        (out / "reports.json").write_text(reports_to_json(named))
        (out / "reports.txt").write_text(reports_to_table(named))
        (out / "pr_curves.csv").write_text(pr_rows_to_csv(pr_rows))
        (out / "evaluation.json").write_text(json.dumps(doc, indent=2))
    return doc


def simulate(
    out_dir,
    scene: Scene,
    rig: RigConfig,
    mode: str = "geometric",
    duration: float = 1.0,
    dt: float | None = None,
    noise_rate: float = 0.0,
    seed: int = 0,
    theta: float | None = None,
    samples_per_edge: int = 25,
    packet_count: int | None = None,
    packet_duration: float | None = None,
) -> dict:
    """Generate a synthetic dataset ready for reconstruction and evaluation.

    Writes per-camera event files, the rig trajectory, the calibration, and one
    ground-truth depth map per packet window (rendered at camera 0's pose at
    the window midpoint, exactly where reconstruction places its reference).
    Also writes a pipeline config wired to the generated files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if mode == "geometric":
        streams = generate_events_geometric(
            scene, rig, duration, samples_per_edge=samples_per_edge,
            dt=1e-3 if dt is None else dt, noise_rate=noise_rate, seed=seed,
        )
    elif mode == "photometric":
        streams = generate_events_photometric(
            scene, rig, theta=theta, duration=duration,
            dt=2e-3 if dt is None else dt, noise_rate=noise_rate, seed=seed,
        )
    else:
        raise ConfigurationError(f"unknown simulation mode {mode!r}")

    outputs: dict[str, str] = {}
    event_files = []
    for i, stream in enumerate(streams):
        name = f"events_cam{i}.txt"
        write_event_text(out / name, stream)
        outputs[name] = _sha256_file(out / name)
        event_files.append(name)
    write_trajectory_text(out / "trajectory.txt", rig.trajectory)
    outputs["trajectory.txt"] = _sha256_file(out / "trajectory.txt")
    write_calibration(out / "calibration.json", rig)
    outputs["calibration.json"] = _sha256_file(out / "calibration.json")

    windows = packet_windows(streams, packet_count, packet_duration)
    cams = rig.cameras
    trajs = [rig.camera_trajectory(i) for i in range(rig.n_cameras)]
    z_lo, z_hi = np.inf, -np.inf
    for pi, (a, b) in enumerate(windows):
        ref = default_reference_view(trajs, cams, 0.5 * (a + b), clamp=True)
        gt = render_gt_depth(scene, ref)
        name = f"gt_{pi:06d}.pfm"
        write_pfm(out / name, gt)
        outputs[name] = _sha256_file(out / name)
        finite = gt[np.isfinite(gt)]
        if finite.size:
            z_lo = min(z_lo, float(finite.min()))
            z_hi = max(z_hi, float(finite.max()))

    if not np.isfinite(z_lo):
        z_lo, z_hi = 1.0, 4.0
    suggested = PipelineConfig(
        events=event_files,
        trajectory="trajectory.txt",
        calibration="calibration.json",
        out="reconstruction",
        packet_count=packet_count,
        packet_duration=packet_duration,
        z_min=round(max(0.05, 0.8 * z_lo), 3),
        z_max=round(1.25 * z_hi, 3),
    )
    (out / "pipeline_config.json").write_text(json.dumps(suggested.to_dict(), indent=2))

    manifest = {
        "kind": "simulation",
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "mode": mode,
        "duration": duration,
        "theta": rig.theta if theta is None else theta,
        "noise_rate": noise_rate,
        "seed": seed,
        "n_cameras": rig.n_cameras,
        "events_per_camera": [len(s) for s in streams],
        "n_gt_maps": len(windows),
        "windows": [[a, b] for a, b in windows],
        "outputs": outputs,
    }
    (out / "sim_manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest
