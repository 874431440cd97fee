"""Shared fixtures. Simulation output is session-scoped; tests must not mutate it."""
import numpy as np
import pytest

from evdepth import (
    Scene,
    default_reference_view,
    default_rig,
    generate_events_geometric,
    grid_plane_segments,
)


@pytest.fixture(scope="session")
def stereo_rig():
    return default_rig(n_cameras=2, duration=1.0)


@pytest.fixture(scope="session")
def vertical_line_scene():
    # Vertical stripes only: edges stay triangulatable under the rig's
    # x-translation (horizontal edges slide along themselves).
    segs = grid_plane_segments(z=2.0, n_lines=9)[:9]
    return Scene(segments=segs, planes=[])


@pytest.fixture(scope="session")
def stereo_streams(stereo_rig, vertical_line_scene):
    return generate_events_geometric(
        vertical_line_scene, stereo_rig, 1.0, samples_per_edge=120, seed=0
    )


@pytest.fixture(scope="session")
def stereo_setup(stereo_rig, stereo_streams):
    cams = stereo_rig.cameras
    trajs = [stereo_rig.camera_trajectory(i) for i in range(2)]
    t0 = min(float(s.t[0]) for s in stereo_streams)
    t1 = max(float(s.t[-1]) for s in stereo_streams)
    ref = default_reference_view(trajs, cams, 0.5 * (t0 + t1))
    return {
        "streams": stereo_streams,
        "cams": cams,
        "trajs": trajs,
        "window": (t0, t1),
        "ref": ref,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
