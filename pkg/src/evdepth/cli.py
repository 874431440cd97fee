"""Command-line entry points.

Exit codes: 0 success, 1 configuration problems, 2 malformed or missing data,
3 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .bench import bench_table, run_bench
from .config import PipelineConfig, apply_overrides, load_config
from .errors import ConfigurationError, DataError, EvdepthError, NumericalError
from .evaluation import MetricsReport, reports_to_table
from .pipeline import evaluate_depth, project_dsi, reconstruct, simulate
from .simulator import default_rig, plane_scene
from .writers import rig_from_json, scene_from_json

logger = logging.getLogger(__name__)


def _add_reconstruct_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config JSON; flags below override its keys")
    p.add_argument("--events", action="append",
                   help="event text file, one per camera (repeatable, camera order)")
    p.add_argument("--trajectory", help="rig trajectory file (t tx ty tz qx qy qz qw)")
    p.add_argument("--calibration", help="calibration JSON")
    p.add_argument("--out", help="output directory")
    p.add_argument("--zmin", type=float, dest="z_min", help="nearest depth plane [m]")
    p.add_argument("--zmax", type=float, dest="z_max", help="farthest depth plane [m]")
    p.add_argument("--nz", type=int, dest="n_z", help="number of depth planes")
    p.add_argument("--depth-sampling", choices=["inverse_depth", "linear"],
                   dest="depth_sampling")
    p.add_argument("--scheme", help='fusion scheme, e.g. "Hc*At" (right token applied first)')
    p.add_argument("--ns", type=int, dest="n_s", help="temporal sub-intervals per packet")
    p.add_argument("--split", choices=["equal_time", "equal_count"])
    p.add_argument("--shuffle", help='"off", "cyclic", or "seed:<int>"')
    p.add_argument("--packet-count", type=int, dest="packet_count",
                   help="events per packet (pooled over cameras)")
    p.add_argument("--packet-duration", type=float, dest="packet_duration",
                   help="packet length in seconds")
    p.add_argument("--threads", type=int, help="worker threads for the plane sweep")
    p.add_argument("--subvoxel", action="store_true", default=None,
                   help="parabolic refinement of the depth argmax")
    p.add_argument("--morph-fill", action="store_true", default=None, dest="morph_fill",
                   help="grow the map into 4-neighbor gaps after filtering")
    p.add_argument("--robust-mode", choices=["two_pass", "streaming"], dest="robust_mode")
    p.add_argument("--timestamps-us", action="store_true", default=None,
                   dest="timestamps_in_us", help="event timestamps are integer microseconds")
    p.add_argument("--no-png", action="store_false", default=None, dest="write_png")
    p.add_argument("--no-ply", action="store_false", default=None, dest="write_ply")


_OVERRIDE_KEYS = [
    "events", "trajectory", "calibration", "out", "z_min", "z_max", "n_z",
    "depth_sampling", "scheme", "n_s", "split", "shuffle", "packet_count",
    "packet_duration", "threads", "subvoxel", "morph_fill", "robust_mode",
    "timestamps_in_us", "write_png", "write_ply",
]


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    return apply_overrides(cfg, overrides)


def _cmd_reconstruct(args) -> int:
    manifest = reconstruct(_config_from_args(args))
    print(f"wrote {manifest['n_packets']} depth map(s) to {manifest['config']['out']}")
    return 0


def _cmd_project_dsi(args) -> int:
    info = project_dsi(_config_from_args(args), packet_index=args.packet, dump=args.dump)
    print(json.dumps(info, indent=2))
    return 0


def _cmd_simulate(args) -> int:
    if args.scene:
        with open(args.scene) as f:
            scene = scene_from_json(json.load(f))
    else:
        textured = args.mode == "photometric" or args.textured
        scene = plane_scene(z=args.plane_z, textured=textured)
    if args.rig:
        with open(args.rig) as f:
            rig = rig_from_json(json.load(f))
    else:
        rig = default_rig(
            n_cameras=args.cameras, baseline=args.baseline, width=args.width,
            height=args.height, focal=args.focal, speed=args.speed,
            duration=args.duration, theta=args.theta,
        )
    manifest = simulate(
        args.out, scene, rig, mode=args.mode, duration=args.duration, dt=args.dt,
        noise_rate=args.noise_rate, seed=args.seed, theta=args.theta,
        samples_per_edge=args.samples_per_edge,
        packet_count=args.packet_count, packet_duration=args.packet_duration,
    )
    counts = ", ".join(str(n) for n in manifest["events_per_camera"])
    print(f"simulated {manifest['n_cameras']} camera(s) with [{counts}] events "
          f"and {manifest['n_gt_maps']} ground-truth map(s) in {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    thresholds = [float(tok) for tok in args.pr_thresholds.split(",") if tok.strip()]
    doc = evaluate_depth(
        args.est, args.gt, out_dir=args.out,
        max_depth=args.max_depth if args.max_depth else np.inf,
        tau_abs=args.tau_abs, tau_rel=args.tau_rel, thresholds=thresholds,
    )
    named = [(p["est"], _report_from_dict(p["report"])) for p in doc["pairs"]]
    named.append(("combined", _report_from_dict(doc["combined"])))
    print(reports_to_table(named), end="")
    return 0


def _report_from_dict(d: dict) -> MetricsReport:
    return MetricsReport(**d)


def _cmd_bench(args) -> int:
    summary = run_bench(out_dir=args.out, quick=args.quick, reps=args.reps,
                        cv_budget=args.cv_budget, workers=args.threads, seed=args.seed)
    print(bench_table(summary), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evdepth",
        description="Multi-camera event-based depth estimation by fused space sweeps",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="events + poses -> depth maps")
    _add_reconstruct_flags(p)
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=["geometric", "photometric"], default="geometric")
    p.add_argument("--duration", type=float, default=1.0, help="recording length [s]")
    p.add_argument("--dt", type=float, default=None, help="simulation time step [s]")
    p.add_argument("--noise-rate", type=float, default=0.0, dest="noise_rate",
                   help="uniform noise events per pixel per second")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.2, help="contrast threshold")
    p.add_argument("--scene", help="scene JSON (defaults to a frontoparallel plane)")
    p.add_argument("--rig", help="rig JSON (defaults to a stereo rig)")
    p.add_argument("--plane-z", type=float, default=2.0, dest="plane_z",
                   help="default-scene plane distance [m]")
    p.add_argument("--textured", action="store_true",
                   help="texture the default scene (implied by photometric mode)")
    p.add_argument("--cameras", type=int, default=2)
    p.add_argument("--baseline", type=float, default=0.2, help="camera spacing [m]")
    p.add_argument("--width", type=int, default=240)
    p.add_argument("--height", type=int, default=180)
    p.add_argument("--focal", type=float, default=200.0)
    p.add_argument("--speed", type=float, default=0.5, help="rig speed along +x [m/s]")
    p.add_argument("--samples-per-edge", type=int, default=25, dest="samples_per_edge")
    p.add_argument("--packet-count", type=int, default=None, dest="packet_count",
                   help="pooled events per ground-truth window")
    p.add_argument("--packet-duration", type=float, default=None, dest="packet_duration",
                   help="ground-truth window length [s]")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("evaluate", help="compare depth maps against ground truth")
    p.add_argument("--est", required=True, help="estimated .pfm/.npy file or directory")
    p.add_argument("--gt", required=True, help="ground-truth .pfm/.npy file or directory")
    p.add_argument("--out", help="directory for reports and PR curves")
    p.add_argument("--max-depth", type=float, default=0.0, dest="max_depth",
                   help="ignore ground truth beyond this depth (0: no limit)")
    p.add_argument("--tau-abs", type=float, default=0.3, dest="tau_abs")
    p.add_argument("--tau-rel", type=float, default=0.05, dest="tau_rel")
    p.add_argument("--pr-thresholds", default="0.05,0.1,0.2,0.4", dest="pr_thresholds",
                   help="comma-separated error thresholds [m]")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("project-dsi", help="write max projections of one packet's grid")
    _add_reconstruct_flags(p)
    p.add_argument("--packet", type=int, default=0, help="packet index")
    p.add_argument("--dump", action="store_true", help="also write the raw grid volume")
    p.set_defaults(fn=_cmd_project_dsi)

    p = sub.add_parser("bench", help="wallclock scaling benchmarks")
    p.add_argument("--out", help="directory for CSV results and JSON summary")
    p.add_argument("--quick", action="store_true", help="smaller sweep sizes")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--cv-budget", type=float, default=0.2, dest="cv_budget",
                   help="re-measure while std/median exceeds this")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        logger.error("configuration: %s", exc)
        return 1
    except DataError as exc:
        logger.error("data: %s", exc)
        return 2
    except OSError as exc:
        logger.error("i/o: %s", exc)
        return 2
    except NumericalError as exc:
        logger.error("numerical: %s", exc)
        return 3
    except EvdepthError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
