"""Multi-camera event-based depth estimation by fused disparity space sweeps.

Events from one or more moving event cameras are warped onto a stack of
depth planes at a shared reference view; per-(camera, time-slice) ray-count
volumes are fused with configurable means, and semi-dense depth is read off
the fused volume by a filtered argmax.
"""

from .errors import (
    AlignmentError,
    ConfigurationError,
    DataError,
    DegenerateGeometryError,
    DistortionError,
    EvdepthError,
    NumericalError,
    OrderingError,
    ParseError,
    RangeError,
)
from .events import (
    BINARY_EVENT_DTYPE,
    Event,
    EventStream,
    Packet,
    concatenate,
    crop_time,
    packetize,
    packetize_by_count,
    packetize_by_duration,
    parse_event_text,
    parse_trajectory_text,
    read_event_binary,
    serialize_event_text,
    serialize_trajectory_text,
    write_event_binary,
    write_event_text,
    write_trajectory_text,
)
from .geometry import (
    CameraModel,
    Pose,
    ReferenceView,
    Trajectory,
    homography_for_plane,
    interpolate_pose,
    plane_homography,
    relative_pose,
    undistort_pixel,
    warp_event,
    warp_event_normalized,
    warp_points_to_planes,
)
from .dsi import (
    DsiGrid,
    SweepStats,
    bilinear_vote,
    inverse_depth_planes,
    max_projections,
    new_grid,
    plane_depths_for,
    read_grid_dump,
    sweep_events,
    write_grid_dump,
)
from .fusion import (
    FusionFunction,
    FusionScheme,
    apply_scheme,
    build_grid_matrix,
    default_reference_view,
    fuse_arrays,
    fuse_grid_matrix,
    fuse_grids,
    fuse_value,
    parse_scheme,
    scheme_to_string,
    shuffle_pairing,
    split_window,
)
from .depth import (
    DepthResult,
    RobustMaxAccumulator,
    agt_mask,
    apply_mask,
    extract_depth_confidence,
    gaussian_kernel_2d,
    median_filter,
    morph_fill,
    normalize_confidence,
    to_point_cloud,
)
from .evaluation import (
    MetricsReport,
    aggregate_reports,
    depth_errors,
    pr_counts,
    pr_curves,
    pr_rows_from_counts,
    pr_rows_to_csv,
    reports_to_json,
    reports_to_table,
)
from .simulator import (
    PlanePatch,
    RigConfig,
    Scene,
    SinusoidTexture,
    default_rig,
    generate_events_geometric,
    generate_events_photometric,
    grid_plane_segments,
    linear_trajectory,
    plane_scene,
    render_gt_depth,
)
from .writers import (
    depth_to_rgba,
    load_depth_map,
    read_calibration,
    read_pfm,
    read_ply_points,
    write_calibration,
    scene_from_json,
    write_confidence_png,
    write_depth_png,
    write_pfm,
    write_ply,
    write_projection_png,
)
from .config import PipelineConfig, apply_overrides, config_from_dict, load_config
from .pipeline import evaluate_depth, packet_windows, project_dsi, reconstruct, simulate
from .bench import bench_table, run_bench

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
