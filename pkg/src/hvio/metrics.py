"""Trajectory accuracy metrics: ATE, RPE, and their standard deviation.

Per-pose errors are Lie-algebra log norms of the ground-truth/estimate
mismatch; a translation-only variant is provided for reports in meters.
Optional closed-form SE(3)/Sim(3) alignment handles trajectories expressed in
different frames (and, for monocular input, different scales).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAlignment, DeltaTooLarge, MalformedCsv, NoOverlap
from .geometry import Pose, Rotation


class Trajectory:
    """Time-ordered pose sequence with strictly increasing timestamps."""

    def __init__(self, timestamps, poses: list[Pose]):
        timestamps = np.asarray(timestamps, dtype=float)
        if len(timestamps) != len(poses):
            raise ValueError("timestamps and poses must have equal length")
        if len(timestamps) > 1 and not (np.diff(timestamps) > 0).all():
            raise ValueError("timestamps must be strictly increasing")
        self.timestamps = timestamps
        self.poses = list(poses)

    def __len__(self):
        return len(self.poses)

    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def save_tum(self, path) -> None:
        """TUM text format: ``timestamp tx ty tz qx qy qz qw`` per line.

        Pose fields carry 9 significant digits; timestamps are written at
        nanosecond resolution so association survives large epoch offsets.
        """
        with open(path, "w", encoding="utf-8") as fh:
            for t, pose in zip(self.timestamps, self.poses):
                w, x, y, z = pose.rotation.q
                tx, ty, tz = pose.translation
                fields = [f"{t:.9f}"] + [f"{v:.9g}" for v in (tx, ty, tz, x, y, z, w)]
                fh.write(" ".join(fields) + "\n")

    @classmethod
    def load_tum(cls, path) -> "Trajectory":
        ts, poses = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 8:
                    raise MalformedCsv(f"{path}:{lineno}: expected 8 fields")
                try:
                    vals = [float(v) for v in parts]
                except ValueError as exc:
                    raise MalformedCsv(f"{path}:{lineno}: {exc}") from exc
                ts.append(vals[0])
                qx, qy, qz, qw = vals[4:8]
                poses.append(Pose(Rotation([qw, qx, qy, qz]), vals[1:4]))
        return cls(np.array(ts), poses)

    @classmethod
    def load_euroc_csv(cls, path) -> "Trajectory":
        """EuRoC ground truth: ``timestamp_ns, p_xyz, q_w, q_x, q_y, q_z, ...``."""
        ts, poses = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(",")
                if len(parts) < 8:
                    raise MalformedCsv(f"{path}:{lineno}: expected >= 8 fields")
                try:
                    t = int(parts[0]) * 1e-9
                    p = [float(v) for v in parts[1:4]]
                    qw, qx, qy, qz = (float(v) for v in parts[4:8])
                except ValueError as exc:
                    raise MalformedCsv(f"{path}:{lineno}: {exc}") from exc
                ts.append(t)
                poses.append(Pose(Rotation([qw, qx, qy, qz]), p))
        return cls(np.array(ts), poses)


def associate(gt: Trajectory, est: Trajectory, max_dt: float = 0.02):
    """Greedy nearest-timestamp pairing, one-to-one and order-preserving.

    Walks the estimate in order and pairs each pose with the closest not-yet
    consumed ground-truth timestamp within ``max_dt``.  Raises NoOverlap when
    nothing pairs.
    """
    if len(gt) == 0 or len(est) == 0:
        raise NoOverlap("empty trajectory")
    pairs = []
    j = 0
    for i in range(len(est)):
        t = est.timestamps[i]
        while j + 1 < len(gt) and abs(gt.timestamps[j + 1] - t) <= abs(gt.timestamps[j] - t):
            j += 1
        if abs(gt.timestamps[j] - t) <= max_dt:
            pairs.append((gt.poses[j], est.poses[i]))
            j += 1
            if j >= len(gt):
                break
    if not pairs:
        raise NoOverlap("no timestamp pairs within max_dt")
    return pairs


def _pose_error_norm(t_gt: Pose, t_est: Pose) -> float:
    return float(np.linalg.norm((t_gt.inverse() @ t_est).log()))


def ate(pairs, variant: str = "se3"):
    """Absolute trajectory error.

    ``se3`` measures the full Lie-log norm per pose; ``trans`` measures the
    Euclidean distance between positions.  Returns (rmse, per-pose series).
    """
    if len(pairs) == 0:
        raise ValueError("need at least one pose pair")
    if variant == "se3":
        series = np.array([_pose_error_norm(g, e) for g, e in pairs])
    elif variant == "trans":
        series = np.array([np.linalg.norm(g.translation - e.translation) for g, e in pairs])
    else:
        raise ValueError(f"unknown ATE variant {variant!r}")
    return float(np.sqrt(np.mean(series**2))), series


def rpe(pairs, delta: int = 1):
    """Relative pose error over an index gap ``delta`` (local drift)."""
    n = len(pairs)
    if not 1 <= delta < n:
        raise DeltaTooLarge(f"delta {delta} not in [1, {n - 1}]")
    series = np.empty(n - delta)
    for i in range(n - delta):
        g0, e0 = pairs[i]
        g1, e1 = pairs[i + delta]
        rel_gt = g0.inverse() @ g1
        rel_est = e0.inverse() @ e1
        series[i] = _pose_error_norm(rel_gt, rel_est)
    return float(np.sqrt(np.mean(series**2))), series


def sd(series) -> float:
    """Population standard deviation (1/N) of an error series."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("empty series")
    mu = series.mean()
    return float(np.sqrt(np.mean((series - mu) ** 2)))


def align_umeyama(pairs, mode: str = "se3"):
    """Closed-form least-squares alignment of the estimate onto ground truth.

    ``mode`` is one of none / se3 / sim3; sim3 additionally solves the scale,
    which a monocular pipeline cannot observe.  Returns new (gt, est') pairs
    with the transform applied to the estimate (positions scaled and rotated,
    orientations left-composed).
    """
    if mode == "none":
        return list(pairs)
    if mode not in ("se3", "sim3"):
        raise ValueError(f"unknown alignment mode {mode!r}")
    if len(pairs) < 3:
        raise DegenerateAlignment("need >= 3 pose pairs")
    x = np.array([e.translation for _, e in pairs])  # source
    y = np.array([g.translation for g, _ in pairs])  # target
    mx, my = x.mean(axis=0), y.mean(axis=0)
    xc, yc = x - mx, y - my
    cov = yc.T @ xc / len(pairs)
    u, d, vt = np.linalg.svd(cov)
    if d[1] < 1e-12 * max(d[0], 1e-300):
        raise DegenerateAlignment("positions are collinear or coincident")
    s_mat = np.eye(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_mat[2, 2] = -1.0
    r = u @ s_mat @ vt
    if mode == "sim3":
        var_x = (xc**2).sum() / len(pairs)
        scale = float(np.trace(np.diag(d) @ s_mat) / var_x)
    else:
        scale = 1.0
    t = my - scale * r @ mx
    rot = Rotation.from_matrix(r)
    out = []
    for g, e in pairs:
        pos = scale * r @ e.translation + t
        out.append((g, Pose(rot @ e.rotation, pos)))
    return out


@dataclass
class MetricsReport:
    """Evaluation summary plus the per-pose error series."""

    ate_rmse: float | None
    ate_sd: float | None
    ate_mean: float | None
    rpe_rmse: float | None
    rpe_sd: float | None
    rpe_mean: float | None
    n: int
    delta: int
    variant: str
    alignment: str
    ate_series: np.ndarray | None = None
    rpe_series: np.ndarray | None = None

    def to_text(self) -> str:
        lines = [f"poses          {self.n}"]
        if self.ate_rmse is not None:
            lines += [
                f"ATE rmse       {self.ate_rmse:.9g}",
                f"ATE mean       {self.ate_mean:.9g}",
                f"ATE s.d.       {self.ate_sd:.9g}",
            ]
        if self.rpe_rmse is not None:
            lines += [
                f"RPE rmse       {self.rpe_rmse:.9g} (delta={self.delta})",
                f"RPE mean       {self.rpe_mean:.9g}",
                f"RPE s.d.       {self.rpe_sd:.9g}",
            ]
        lines.append(f"variant        {self.variant}")
        lines.append(f"alignment      {self.alignment}")
        return "\n".join(lines)

    def save_series_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,ate_error,rpe_error\n")
            n = max(
                len(self.ate_series) if self.ate_series is not None else 0,
                len(self.rpe_series) if self.rpe_series is not None else 0,
            )
            for i in range(n):
                a = (
                    f"{self.ate_series[i]:.9g}"
                    if self.ate_series is not None and i < len(self.ate_series)
                    else ""
                )
                r = (
                    f"{self.rpe_series[i]:.9g}"
                    if self.rpe_series is not None and i < len(self.rpe_series)
                    else ""
                )
                fh.write(f"{i},{a},{r}\n")


def evaluate(
    gt: Trajectory,
    est: Trajectory,
    metric: str = "all",
    variant: str = "se3",
    delta: int = 1,
    alignment: str = "none",
    max_dt: float = 0.02,
) -> MetricsReport:
    """Associate, optionally align, and compute the requested metrics."""
    pairs = associate(gt, est, max_dt)
    pairs = align_umeyama(pairs, alignment)
    ate_rmse = ate_sd = ate_mean = None
    rpe_rmse = rpe_sd = rpe_mean = None
    ate_series = rpe_series = None
    if metric in ("ate", "all"):
        ate_rmse, ate_series = ate(pairs, variant)
        ate_sd = sd(ate_series)
        ate_mean = float(ate_series.mean())
    if metric in ("rpe", "all"):
        rpe_rmse, rpe_series = rpe(pairs, delta)
        rpe_sd = sd(rpe_series)
        rpe_mean = float(rpe_series.mean())
    return MetricsReport(
        ate_rmse,
        ate_sd,
        ate_mean,
        rpe_rmse,
        rpe_sd,
        rpe_mean,
        len(pairs),
        delta,
        variant,
        alignment,
        ate_series,
        rpe_series,
    )
