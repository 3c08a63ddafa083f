"""IMU sample streams and dead-reckoning pose prediction.

The integrator is a midpoint scheme over bias-corrected gyro and
accelerometer readings.  It produces the body-frame relative pose between two
timestamps, which the tracker turns into a camera-frame motion prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GapTooLarge, MalformedCsv, NonMonotoneTimestamps
from .geometry import Pose, Rotation

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class ImuSample:
    timestamp: float  # seconds
    gyro: np.ndarray  # rad/s, body frame
    accel: np.ndarray  # m/s^2, body frame, includes the gravity reaction


@dataclass
class ImuState:
    """World-frame navigation state of the IMU body."""

    orientation: Rotation = field(default_factory=Rotation.identity)
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())

    def pose(self) -> Pose:
        return Pose(self.orientation, self.position)


@dataclass(frozen=True)
class ImuPrediction:
    """Body-frame relative pose over an integration interval."""

    relative: Pose
    translation_norm: float
    sample_count: int

    @property
    def valid(self) -> bool:
        return self.sample_count > 0

    @classmethod
    def empty(cls) -> "ImuPrediction":
        return cls(Pose.identity(), 0.0, 0)


class ImuStream:
    """Time-sorted IMU samples with interval slicing."""

    def __init__(self, samples: list[ImuSample]):
        ts = np.array([s.timestamp for s in samples])
        if len(ts) > 1 and not (np.diff(ts) > 0).all():
            raise NonMonotoneTimestamps("IMU timestamps must be strictly increasing")
        self.samples = list(samples)
        self._ts = ts

    def __len__(self):
        return len(self.samples)

    def slice_covering(self, t0: float, t1: float) -> list[ImuSample]:
        """Samples spanning [t0, t1], including one boundary sample each side."""
        lo = int(np.searchsorted(self._ts, t0, side="right")) - 1
        hi = int(np.searchsorted(self._ts, t1, side="left")) + 1
        lo = max(lo, 0)
        hi = min(hi, len(self.samples))
        return self.samples[lo:hi]


def _interp_sample(a: ImuSample, b: ImuSample, t: float) -> ImuSample:
    w = (t - a.timestamp) / (b.timestamp - a.timestamp)
    return ImuSample(t, (1 - w) * a.gyro + w * b.gyro, (1 - w) * a.accel + w * b.accel)


def integrate(
    state: ImuState,
    samples: list[ImuSample],
    t0: float,
    t1: float,
    max_gap_factor: float = 3.0,
) -> tuple[ImuState, ImuPrediction]:
    """Midpoint dead reckoning over [t0, t1].

    Boundary samples are linearly interpolated so the integration covers the
    interval exactly.  When no samples overlap the interval the state is
    returned unchanged with an identity prediction flagged by
    ``sample_count == 0`` (the caller falls back to another motion model).

    Raises GapTooLarge when an inter-sample gap exceeds ``max_gap_factor``
    times the median sample period of the slice.
    """
    if t0 >= t1:
        raise ValueError("t0 must precede t1")
    inside = [s for s in samples if t0 <= s.timestamp <= t1]
    before = [s for s in samples if s.timestamp < t0]
    after = [s for s in samples if s.timestamp > t1]
    seq: list[ImuSample] = []
    if not inside or inside[0].timestamp > t0:
        if before and (inside or after):
            nxt = inside[0] if inside else after[0]
            seq.append(_interp_sample(before[-1], nxt, t0))
    seq.extend(inside)
    if not inside or inside[-1].timestamp < t1:
        if after and (inside or before):
            prv = inside[-1] if inside else before[-1]
            seq.append(_interp_sample(prv, after[0], t1))
    if len(seq) < 2:
        return state, ImuPrediction.empty()

    dts = np.diff([s.timestamp for s in seq])
    nominal = float(np.median(dts))
    if nominal > 0 and (dts > max_gap_factor * nominal).any():
        raise GapTooLarge(
            f"max inter-sample gap {dts.max():.6f}s exceeds "
            f"{max_gap_factor}x nominal {nominal:.6f}s"
        )

    start_pose = state.pose()
    r = state.orientation
    v = state.velocity.copy()
    p = state.position.copy()
    g = state.gravity
    for a, b in zip(seq[:-1], seq[1:]):
        dt = b.timestamp - a.timestamp
        if dt <= 0:
            continue
        w_mid = 0.5 * (a.gyro + b.gyro) - state.gyro_bias
        a_mid = 0.5 * (a.accel + b.accel) - state.accel_bias
        r_next = r @ Rotation.exp(w_mid * dt)
        acc_world = 0.5 * (r.apply(a_mid) + r_next.apply(a_mid)) + g
        p = p + v * dt + 0.5 * acc_world * dt * dt
        v = v + acc_world * dt
        r = r_next

    new_state = replace(state, orientation=r, velocity=v, position=p)
    rel = start_pose.inverse() @ new_state.pose()
    return new_state, ImuPrediction(rel, float(np.linalg.norm(rel.translation)), len(seq))


def predict_pose(t_prev: Pose, pred: ImuPrediction, extrinsics: Pose | None = None) -> Pose:
    """Camera pose prior from the previous camera pose and an IMU prediction.

    ``extrinsics`` is the pose of the camera in the IMU body frame; the
    body-frame relative motion is conjugated into the camera frame before
    composition.  Identity extrinsics mean camera and body frames coincide.
    """
    if extrinsics is None:
        return t_prev @ pred.relative
    return t_prev @ (extrinsics.inverse() @ pred.relative @ extrinsics)


def parse_imu_csv(path) -> ImuStream:
    """EuRoC-style IMU CSV: header, rows ``timestamp_ns,wx,wy,wz,ax,ay,az``."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or lineno == 1 and not line[0].isdigit():
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise MalformedCsv(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
            try:
                ts = int(parts[0]) * 1e-9
                vals = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise MalformedCsv(f"{path}:{lineno}: {exc}") from exc
            samples.append(ImuSample(ts, np.array(vals[:3]), np.array(vals[3:])))
    return ImuStream(samples)


def write_imu_csv(path, samples: list[ImuSample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
            "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]\n"
        )
        for s in samples:
            fields = [str(int(round(s.timestamp * 1e9)))]
            fields += [repr(float(x)) for x in s.gyro] + [repr(float(x)) for x in s.accel]
            fh.write(",".join(fields) + "\n")
