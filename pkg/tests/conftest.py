import numpy as np
import pytest

from hvio.geometry import CameraIntrinsics, Pose, Rotation, project


def make_intrinsics(f=300.0, width=512, height=384):
    return CameraIntrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height)


def random_rotation(rng, max_angle=np.pi - 1e-3):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return Rotation.exp(angle * axis)


def make_two_view(seed, n_points=60, rot_deg=8.0, baseline=0.4):
    """Exact two-view instance: poses, world points, and pixel projections.

    Camera 1 sits at the origin looking down +z; camera 2 is displaced by
    ``baseline`` and rotated by ``rot_deg`` about a random axis.  Points are
    kept only if they project inside both views.
    """
    rng = np.random.default_rng(seed)
    k = make_intrinsics()
    pose1 = Pose.identity()
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    r_rel = Rotation.exp(np.deg2rad(rot_deg) * axis)
    t_dir = rng.normal(size=3)
    t_dir /= np.linalg.norm(t_dir)
    t_rel = baseline * t_dir
    # (r_rel, t_rel) maps camera-1 coords to camera-2 coords
    pose2 = Pose(r_rel, t_rel).inverse()

    pts, uv1, uv2 = [], [], []
    while len(pts) < n_points:
        x = np.array(
            [rng.uniform(-1.5, 1.5), rng.uniform(-1.2, 1.2), rng.uniform(3.0, 6.0)]
        )
        a = project(k, pose1, x)
        b = project(k, pose2, x)
        if a is None or b is None:
            continue
        pts.append(x)
        uv1.append(a)
        uv2.append(b)
    return {
        "k": k,
        "pose1": pose1,
        "pose2": pose2,
        "r_rel": r_rel,
        "t_rel": t_rel,
        "points": np.array(pts),
        "uv1": np.array(uv1),
        "uv2": np.array(uv2),
    }


@pytest.fixture(scope="session")
def intrinsics():
    return make_intrinsics()
