"""SO(3)/SE(3) algebra, pinhole camera model, and two-view epipolar estimation.

Conventions used throughout the package:

* A ``Pose`` is the pose of a camera (or body) expressed in the world frame,
  i.e. the camera-to-world transform.  ``pose.apply(x)`` maps camera-frame
  coordinates into the world; ``pose.inverse().apply(x)`` maps world points
  into the camera frame.
* Twists are 6-vectors ``(rho, phi)`` with translational part first.
* Relative view transforms ``(R, t)`` returned by the epipolar functions map
  camera-1 coordinates into camera 2: ``x2 = R @ x1 + t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CheiralityAmbiguous, DegenerateGeometry, LowParallax

Z_MIN = 1e-6
PARALLAX_FLOOR_RAD = np.deg2rad(0.5)


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix [v]x such that [v]x @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


class Rotation:
    """3D rotation stored as a unit quaternion (w, x, y, z), w >= 0."""

    __slots__ = ("q",)

    def __init__(self, q):
        q = np.asarray(q, dtype=float)
        n = np.linalg.norm(q)
        if n < 1e-12:
            raise ValueError("zero-norm quaternion")
        q = q / n
        if q[0] < 0.0:
            q = -q
        self.q = q

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Rotation":
        """Shepperd's method; numerically stable for all rotations."""
        m = np.asarray(m, dtype=float)
        if m[2, 2] < 0:
            if m[0, 0] > m[1, 1]:
                t = 1.0 + m[0, 0] - m[1, 1] - m[2, 2]
                q = [m[2, 1] - m[1, 2], t, m[1, 0] + m[0, 1], m[0, 2] + m[2, 0]]
            else:
                t = 1.0 - m[0, 0] + m[1, 1] - m[2, 2]
                q = [m[0, 2] - m[2, 0], m[1, 0] + m[0, 1], t, m[2, 1] + m[1, 2]]
        else:
            if m[0, 0] < -m[1, 1]:
                t = 1.0 - m[0, 0] - m[1, 1] + m[2, 2]
                q = [m[1, 0] - m[0, 1], m[0, 2] + m[2, 0], m[2, 1] + m[1, 2], t]
            else:
                t = 1.0 + m[0, 0] + m[1, 1] + m[2, 2]
                q = [t, m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]]
        q = np.asarray(q, dtype=float) * (0.5 / np.sqrt(t))
        return cls(q)

    @classmethod
    def exp(cls, phi: np.ndarray) -> "Rotation":
        """Exponential map: rotation vector (radians) to rotation."""
        phi = np.asarray(phi, dtype=float)
        theta = np.linalg.norm(phi)
        half = 0.5 * theta
        if theta < 1e-8:
            # sin(t/2)/t = 1/2 - t^2/48 + O(t^4)
            s = 0.5 - theta * theta / 48.0
        else:
            s = np.sin(half) / theta
        return cls(np.concatenate(([np.cos(half)], s * phi)))

    def log(self) -> np.ndarray:
        """Rotation vector; angle in [0, pi] for the canonical w >= 0 form."""
        w = self.q[0]
        v = self.q[1:]
        n = np.linalg.norm(v)
        if n < 1e-10:
            return 2.0 / w * v * (1.0 - n * n / (3.0 * w * w))
        angle = 2.0 * np.arctan2(n, w)
        return (angle / n) * v

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        xx, yy, zz = x * x, y * y, z * z
        wx, wy, wz = w * x, w * y, w * z
        xy, xz, yz = x * y, x * z, y * z
        return np.array(
            [
                [1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)],
                [2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)],
                [2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)],
            ]
        )

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate a 3-vector or an (N, 3) array of vectors."""
        v = np.asarray(v, dtype=float)
        qv = self.q[1:]
        w = self.q[0]
        t = 2.0 * np.cross(qv, v)
        return v + w * t + np.cross(qv, t)

    def compose(self, other: "Rotation") -> "Rotation":
        w1, v1 = self.q[0], self.q[1:]
        w2, v2 = other.q[0], other.q[1:]
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        return Rotation(np.concatenate(([w], v)))

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        return Rotation(self.q * np.array([1.0, -1.0, -1.0, -1.0]))

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic distance in radians."""
        return float(np.linalg.norm((self.inverse() @ other).log()))

    def __repr__(self):
        return f"Rotation(q={self.q})"


class Pose:
    """Rigid transform: rotation plus translation (camera-to-world)."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: Rotation, translation):
        self.rotation = rotation
        self.translation = np.asarray(translation, dtype=float).reshape(3)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(Rotation.from_matrix(m[:3, :3]), m[:3, 3])

    @classmethod
    def from_rt(cls, r: np.ndarray, t) -> "Pose":
        return cls(Rotation.from_matrix(r), t)

    @classmethod
    def exp(cls, xi: np.ndarray) -> "Pose":
        """SE(3) exponential of a twist (rho, phi)."""
        xi = np.asarray(xi, dtype=float)
        rho, phi = xi[:3], xi[3:]
        theta = np.linalg.norm(phi)
        k = skew(phi)
        if theta < 1e-6:
            a = 0.5 - theta**2 / 24.0
            b = 1.0 / 6.0 - theta**2 / 120.0
        else:
            a = (1.0 - np.cos(theta)) / theta**2
            b = (theta - np.sin(theta)) / theta**3
        v = np.eye(3) + a * k + b * (k @ k)
        return cls(Rotation.exp(phi), v @ rho)

    def log(self) -> np.ndarray:
        """Twist (rho, phi) such that Pose.exp(log(T)) == T (angle < pi)."""
        phi = self.rotation.log()
        theta = np.linalg.norm(phi)
        k = skew(phi)
        if theta < 1e-6:
            c = 1.0 / 12.0 + theta**2 / 720.0
        else:
            c = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
        vinv = np.eye(3) - 0.5 * k + c * (k @ k)
        return np.concatenate((vinv @ self.translation, phi))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.as_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.rotation.apply(x) + self.translation

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation @ other.rotation,
            self.rotation.apply(other.translation) + self.translation,
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.apply(self.translation))

    def __repr__(self):
        return f"Pose(q={self.rotation.q}, t={self.translation})"


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; pixel coordinates place integer indices at pixel centers."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    def k_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def for_level(self, level: int) -> "CameraIntrinsics":
        """Intrinsics of a pyramid level built by 2x2-box decimation.

        Level coordinates relate to full resolution by u_l = (u0 - 0.5) / 2
        applied ``level`` times.
        """
        fx, fy, cx, cy = self.fx, self.fy, self.cx, self.cy
        w, h = self.width, self.height
        for _ in range(level):
            fx, fy = fx / 2.0, fy / 2.0
            cx, cy = (cx - 0.5) / 2.0, (cy - 0.5) / 2.0
            w, h = w // 2, h // 2
        return CameraIntrinsics(fx, fy, cx, cy, w, h)


def level_coords(p: np.ndarray, level: int) -> np.ndarray:
    """Map full-resolution pixel coordinates to a pyramid level."""
    return (np.asarray(p, dtype=float) + 0.5) / (2.0**level) - 0.5


def project(k: CameraIntrinsics, cam_pose: Pose, x_world, z_min: float = Z_MIN):
    """Project a world point through a camera at ``cam_pose``.

    Returns the (2,) pixel, or None when the point is behind the camera
    (z <= z_min) or lands outside the image bounds.
    """
    xc = cam_pose.inverse().apply(np.asarray(x_world, dtype=float))
    if xc[2] <= z_min:
        return None
    u = k.fx * xc[0] / xc[2] + k.cx
    v = k.fy * xc[1] / xc[2] + k.cy
    if not (0.0 <= u <= k.width - 1 and 0.0 <= v <= k.height - 1):
        return None
    return np.array([u, v])


def project_many(
    k: CameraIntrinsics,
    cam_pose: Pose,
    xs_world: np.ndarray,
    margin: float = 0.0,
    z_min: float = Z_MIN,
):
    """Vectorized projection; returns ((N, 2) pixels, (N,) validity mask)."""
    xs = np.asarray(xs_world, dtype=float).reshape(-1, 3)
    xc = cam_pose.inverse().apply(xs)
    z = xc[:, 2]
    safe_z = np.where(z > z_min, z, 1.0)
    uv = np.empty((len(xs), 2))
    uv[:, 0] = k.fx * xc[:, 0] / safe_z + k.cx
    uv[:, 1] = k.fy * xc[:, 1] / safe_z + k.cy
    valid = (
        (z > z_min)
        & (uv[:, 0] >= margin)
        & (uv[:, 0] <= k.width - 1 - margin)
        & (uv[:, 1] >= margin)
        & (uv[:, 1] <= k.height - 1 - margin)
    )
    return uv, valid


def relative_view_transform(pose1: Pose, pose2: Pose):
    """(R, t) mapping camera-1 coordinates into camera 2: x2 = R x1 + t."""
    rel = pose2.inverse() @ pose1
    return rel.rotation.as_matrix(), rel.translation


def essential_from_pose(pose1: Pose, pose2: Pose) -> np.ndarray:
    r, t = relative_view_transform(pose1, pose2)
    return skew(t) @ r


def fundamental_from_pose(pose1: Pose, pose2: Pose, k: CameraIntrinsics) -> np.ndarray:
    kinv = np.linalg.inv(k.k_matrix())
    return kinv.T @ essential_from_pose(pose1, pose2) @ kinv


def _homogeneous(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    return np.hstack([p, np.ones((len(p), 1))])


def sampson_distance_sq(f: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """First-order geometric (Sampson) distance squared, in px^2."""
    x1 = _homogeneous(p1)
    x2 = _homogeneous(p2)
    fx1 = x1 @ f.T
    ftx2 = x2 @ f
    r = np.sum(x2 * fx1, axis=1)
    den = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    return r * r / np.maximum(den, 1e-18)


def epipolar_distances(f: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Symmetric point-to-epipolar-line distance (max of both directions), px."""
    x1 = _homogeneous(p1)
    x2 = _homogeneous(p2)
    l2 = x1 @ f.T  # epipolar lines in image 2
    l1 = x2 @ f  # epipolar lines in image 1
    r = np.abs(np.sum(x2 * l2, axis=1))
    d2 = r / np.maximum(np.hypot(l2[:, 0], l2[:, 1]), 1e-18)
    d1 = r / np.maximum(np.hypot(l1[:, 0], l1[:, 1]), 1e-18)
    return np.maximum(d1, d2)


def _normalize_points(p: np.ndarray):
    centroid = p.mean(axis=0)
    d = np.linalg.norm(p - centroid, axis=1).mean()
    if d < 1e-9:
        raise DegenerateGeometry("coincident points")
    s = np.sqrt(2.0) / d
    t = np.array([[s, 0, -s * centroid[0]], [0, s, -s * centroid[1]], [0, 0, 1]])
    return (p - centroid) * s, t


def _eight_point(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Normalized 8-point fundamental estimate (rank-2 enforced)."""
    n1, t1 = _normalize_points(p1)
    n2, t2 = _normalize_points(p2)
    a = np.empty((len(p1), 9))
    a[:, 0] = n2[:, 0] * n1[:, 0]
    a[:, 1] = n2[:, 0] * n1[:, 1]
    a[:, 2] = n2[:, 0]
    a[:, 3] = n2[:, 1] * n1[:, 0]
    a[:, 4] = n2[:, 1] * n1[:, 1]
    a[:, 5] = n2[:, 1]
    a[:, 6] = n1[:, 0]
    a[:, 7] = n1[:, 1]
    a[:, 8] = 1.0
    _, s, vt = np.linalg.svd(a)
    if s[-2] < 1e-12 * max(s[0], 1.0):
        raise DegenerateGeometry("rank-deficient correspondence system")
    f = vt[-1].reshape(3, 3)
    u, sv, vt = np.linalg.svd(f)
    f = u @ np.diag([sv[0], sv[1], 0.0]) @ vt
    f = t2.T @ f @ t1
    n = np.linalg.norm(f)
    if n < 1e-15:
        raise DegenerateGeometry("zero fundamental matrix")
    return f / n


def estimate_fundamental(
    p1: np.ndarray,
    p2: np.ndarray,
    inlier_threshold: float = 1.0,
    confidence: float = 0.99,
    max_iters: int = 500,
    seed: int = 0,
):
    """RANSAC + normalized 8-point fundamental matrix.

    Args:
        p1, p2: (N, 2) matched pixel coordinates.
        inlier_threshold: Sampson distance threshold in pixels.
        seed: RNG seed; identical inputs and seed give identical output.

    Returns:
        (F, inlier_mask) with F scaled to unit Frobenius norm and rank 2.
    """
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=float).reshape(-1, 2)
    n = len(p1)
    if n < 8 or len(p2) != n:
        raise DegenerateGeometry(f"need >= 8 correspondences, got {n}")

    rng = np.random.default_rng(seed)
    thr_sq = inlier_threshold**2
    best_mask = None
    best_count = 0
    iters = max_iters
    it = 0
    while it < iters:
        it += 1
        sample = rng.choice(n, size=8, replace=False)
        try:
            f = _eight_point(p1[sample], p2[sample])
        except DegenerateGeometry:
            continue
        mask = sampson_distance_sq(f, p1, p2) < thr_sq
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            w = count / n
            if w >= 1.0 - 1e-12:
                break
            denom = np.log(max(1.0 - w**8, 1e-12))
            iters = min(max_iters, int(np.ceil(np.log(1.0 - confidence) / denom)))
    if best_mask is None or best_count < 8:
        raise DegenerateGeometry("RANSAC found fewer than 8 inliers")

    # final refit on the consensus set
    f = _eight_point(p1[best_mask], p2[best_mask])
    mask = sampson_distance_sq(f, p1, p2) < thr_sq
    if mask.sum() < 8:
        mask = best_mask
        f = _eight_point(p1[best_mask], p2[best_mask])
    return f, mask


def essential_from_fundamental(f: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """E = K^T F K, with singular values projected to (s, s, 0)."""
    km = k.k_matrix()
    e = km.T @ f @ km
    u, s, vt = np.linalg.svd(e)
    sigma = 0.5 * (s[0] + s[1])
    return u @ np.diag([sigma, sigma, 0.0]) @ vt


def _triangulate_linear_batch(p_mat1, p_mat2, p1, p2):
    """Linear DLT triangulation of many correspondences; returns (N, 3)."""
    n = len(p1)
    a = np.empty((n, 4, 4))
    a[:, 0] = p1[:, 0, None] * p_mat1[2] - p_mat1[0]
    a[:, 1] = p1[:, 1, None] * p_mat1[2] - p_mat1[1]
    a[:, 2] = p2[:, 0, None] * p_mat2[2] - p_mat2[0]
    a[:, 3] = p2[:, 1, None] * p_mat2[2] - p_mat2[1]
    _, _, vt = np.linalg.svd(a)
    xh = vt[:, -1, :]
    w = xh[:, 3]
    w = np.where(np.abs(w) < 1e-15, 1e-15, w)
    return xh[:, :3] / w[:, None]


def decompose_essential(e: np.ndarray, p1: np.ndarray, p2: np.ndarray, k: CameraIntrinsics):
    """Recover (Rotation, unit translation) from an essential matrix.

    The four SVD candidates are disambiguated by cheirality: the candidate
    placing strictly the most triangulated correspondences in front of both
    cameras wins.  Ties (including no positive-depth points at all) raise
    CheiralityAmbiguous.
    """
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=float).reshape(-1, 2)
    u, _, vt = np.linalg.svd(e)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    r1 = u @ w @ vt
    r2 = u @ w.T @ vt
    t = u[:, 2]
    candidates = [(r1, t), (r1, -t), (r2, t), (r2, -t)]

    km = k.k_matrix()
    p_mat1 = km @ np.hstack([np.eye(3), np.zeros((3, 1))])
    counts = []
    for r, tc in candidates:
        if len(p1) == 0:
            counts.append(0)
            continue
        p_mat2 = km @ np.hstack([r, tc.reshape(3, 1)])
        x = _triangulate_linear_batch(p_mat1, p_mat2, p1, p2)
        z1 = x[:, 2]
        z2 = (x @ r.T + tc)[:, 2]
        counts.append(int(np.sum((z1 > 0) & (z2 > 0))))
    order = np.argsort(counts)[::-1]
    if counts[order[0]] == 0 or counts[order[0]] == counts[order[1]]:
        raise CheiralityAmbiguous(f"candidate depth counts {counts}")
    r, tc = candidates[order[0]]
    return Rotation.from_matrix(r), tc / np.linalg.norm(tc)


def _projection_matrix(k: CameraIntrinsics, cam_pose: Pose) -> np.ndarray:
    w2c = cam_pose.inverse()
    rt = np.hstack([w2c.rotation.as_matrix(), w2c.translation.reshape(3, 1)])
    return k.k_matrix() @ rt


def triangulation_angle(pose1: Pose, pose2: Pose, x_world: np.ndarray) -> float:
    """Angle in radians between the two viewing rays of a world point."""
    r1 = np.asarray(x_world, dtype=float) - pose1.translation
    r2 = np.asarray(x_world, dtype=float) - pose2.translation
    n1, n2 = np.linalg.norm(r1), np.linalg.norm(r2)
    if n1 < 1e-12 or n2 < 1e-12:
        return 0.0
    c = np.clip(r1 @ r2 / (n1 * n2), -1.0, 1.0)
    return float(np.arccos(c))


def triangulate(
    p1,
    p2,
    pose1: Pose,
    pose2: Pose,
    k: CameraIntrinsics,
    parallax_floor: float = PARALLAX_FLOOR_RAD,
) -> np.ndarray:
    """Triangulate one correspondence: linear DLT plus one Gauss-Newton step.

    Raises LowParallax when the viewing rays subtend less than the floor angle
    (0.5 degrees by default), which also covers identical poses.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    baseline = np.linalg.norm(pose1.translation - pose2.translation)
    if baseline < 1e-12:
        raise LowParallax("zero baseline")
    pm1 = _projection_matrix(k, pose1)
    pm2 = _projection_matrix(k, pose2)
    x = _triangulate_linear_batch(pm1, pm2, p1.reshape(1, 2), p2.reshape(1, 2))[0]
    if triangulation_angle(pose1, pose2, x) < parallax_floor:
        raise LowParallax("ray angle below parallax floor")

    # one Gauss-Newton step on the 4 reprojection residuals
    def residual_jac(pt):
        res = np.empty(4)
        jac = np.empty((4, 3))
        for i, (pm, obs) in enumerate(((pm1, p1), (pm2, p2))):
            h = pm @ np.append(pt, 1.0)
            z = h[2]
            if abs(z) < 1e-12:
                raise LowParallax("point at infinity during refinement")
            res[2 * i : 2 * i + 2] = h[:2] / z - obs
            jac[2 * i] = (pm[0, :3] - (h[0] / z) * pm[2, :3]) / z
            jac[2 * i + 1] = (pm[1, :3] - (h[1] / z) * pm[2, :3]) / z
        return res, jac

    res, jac = residual_jac(x)
    try:
        step = np.linalg.solve(jac.T @ jac, -jac.T @ res)
    except np.linalg.LinAlgError:
        return x
    x_new = x + step
    res_new, _ = residual_jac(x_new)
    if res_new @ res_new < res @ res:
        return x_new
    return x


def pose_change_frobenius(t_cur: Pose, t_prev: Pose) -> float:
    """Frobenius norm of inverse(T_t) @ T_prev - I, the keyframe motion score."""
    d = t_cur.inverse().as_matrix() @ t_prev.as_matrix() - np.eye(4)
    return float(np.linalg.norm(d))
