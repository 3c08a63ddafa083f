"""FAST corner detection, BRIEF descriptors, and Hamming matching."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import PatchOutOfBounds
from .image import GrayImage

# Bresenham circle of radius 3, in contiguous order (dx, dy)
CIRCLE = np.array(
    [
        (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
        (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
    ]
)
FAST_ARC = 9  # contiguous circle pixels required (FAST-9)
NMS_GRID = 8  # retention grid is NMS_GRID x NMS_GRID cells

BRIEF_BITS = 256
BRIEF_PATCH = 31  # full patch side; corner must be >= 15 px from the border
BRIEF_SMOOTH = 9  # box filter applied to the patch before comparisons
BRIEF_PATTERN_SEED = 0x4252494546  # fixed seed; the pattern is a constant
_PATTERN_SIGMA = BRIEF_PATCH / 5.0
_PATTERN_CLIP = 11  # keeps every smoothed sample inside the 31x31 patch


def _make_brief_pattern() -> np.ndarray:
    rng = np.random.default_rng(BRIEF_PATTERN_SEED)
    pts = rng.normal(0.0, _PATTERN_SIGMA, size=(BRIEF_BITS, 4))
    return np.clip(np.rint(pts), -_PATTERN_CLIP, _PATTERN_CLIP).astype(np.int64)


BRIEF_PATTERN = _make_brief_pattern()

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)


@dataclass(frozen=True)
class Corner:
    """FAST corner: subpixel position, detector response, pyramid level."""

    x: float
    y: float
    score: float
    level: int = 0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class MatchSet:
    """One-to-one descriptor matches: (query index, train index, distance)."""

    query_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    train_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    distances: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint16))

    def __len__(self):
        return len(self.query_idx)


def _fast_masks(f: np.ndarray, threshold: float):
    """Per-pixel bright/dark comparison stack over the 16 circle offsets."""
    h, w = f.shape
    center = f[3 : h - 3, 3 : w - 3]
    bright = np.empty((16, h - 6, w - 6), dtype=bool)
    dark = np.empty((16, h - 6, w - 6), dtype=bool)
    for i, (dx, dy) in enumerate(CIRCLE):
        ring = f[3 + dy : h - 3 + dy, 3 + dx : w - 3 + dx]
        bright[i] = ring > center + threshold
        dark[i] = ring < center - threshold
    return bright, dark


def _contiguous_arc(mask: np.ndarray, arc: int) -> np.ndarray:
    """True where >= arc contiguous circle entries are set (wrap-around)."""
    m2 = np.concatenate([mask, mask[: arc - 1]], axis=0)
    out = np.zeros(m2.shape[1:], dtype=bool)
    counts = np.zeros(m2.shape[1:], dtype=np.int16)
    for i in range(m2.shape[0]):
        counts = np.where(m2[i], counts + 1, 0)
        out |= counts >= arc
    return out


def _fast_scores(f: np.ndarray, xs, ys, threshold: float) -> np.ndarray:
    """Sum-of-absolute-differences score at candidate pixels."""
    ring = np.stack(
        [f[ys + dy, xs + dx] for dx, dy in CIRCLE], axis=1
    )  # (n, 16)
    center = f[ys, xs][:, None]
    bright = np.maximum(ring - center - threshold, 0.0).sum(axis=1)
    dark = np.maximum(center - ring - threshold, 0.0).sum(axis=1)
    return np.maximum(bright, dark)


def detect_fast(
    img: GrayImage, threshold: float = 20.0, max_corners: int = 500, level: int = 0
) -> list[Corner]:
    """FAST-9 corners with 3x3 non-maximum suppression and grid bucketing.

    Corners are refined to subpixel positions by a quadratic fit on the score
    map and returned ordered by (score desc, y, x).  Retention walks an 8x8
    grid of image cells round-robin so that the kept corners cover the image.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    f = img.floats
    h, w = f.shape
    if h < 7 or w < 7:
        return []

    bright, dark = _fast_masks(f, threshold)
    # cheap pretest: an arc of 9 always covers >= 2 of the 4 compass points
    compass_b = bright[0::4].sum(axis=0) >= 2
    compass_d = dark[0::4].sum(axis=0) >= 2
    candidate = np.zeros_like(compass_b)
    candidate[compass_b] = _contiguous_arc(bright[:, compass_b], FAST_ARC)
    candidate[compass_d] |= _contiguous_arc(dark[:, compass_d], FAST_ARC)
    cy, cx = np.nonzero(candidate)
    if len(cy) == 0:
        return []
    cx = cx + 3
    cy = cy + 3

    scores = _fast_scores(f, cx, cy, threshold)
    score_map = np.zeros((h, w))
    score_map[cy, cx] = scores

    # 3x3 NMS; ties broken toward smaller (y, x)
    keep = np.ones(len(cx), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            ny = cy + dy
            nx = cx + dx
            ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
            neigh = np.zeros(len(cx))
            neigh[ok] = score_map[ny[ok], nx[ok]]
            if dy < 0 or (dy == 0 and dx < 0):
                # earlier in scan order: this pixel wins score ties
                keep &= scores >= neigh
            else:
                keep &= (scores > neigh) | (neigh == 0)
    cx, cy, scores = cx[keep], cy[keep], scores[keep]
    if len(cx) == 0:
        return []

    corners = [
        Corner(x, y, s, level)
        for x, y, s in zip(cx.astype(float), cy.astype(float), scores)
    ]
    corners = _subpixel_refine(f, corners, threshold)

    # grid-bucketed retention for spatial uniformity
    order = sorted(range(len(corners)), key=lambda i: (-corners[i].score, corners[i].y, corners[i].x))
    cell_w = max(1.0, w / NMS_GRID)
    cell_h = max(1.0, h / NMS_GRID)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i in order:
        key = (int(corners[i].y / cell_h), int(corners[i].x / cell_w))
        buckets.setdefault(key, []).append(i)
    picked: list[int] = []
    while len(picked) < max_corners and buckets:
        for key in sorted(buckets):
            picked.append(buckets[key].pop(0))
            if not buckets[key]:
                del buckets[key]
            if len(picked) >= max_corners:
                break
    picked_corners = [corners[i] for i in picked]
    picked_corners.sort(key=lambda c: (-c.score, c.y, c.x))
    return picked_corners


def _subpixel_refine(f: np.ndarray, corners: list[Corner], threshold: float) -> list[Corner]:
    """Quadratic fit on the 3x3 score neighborhood of each NMS winner."""
    if not corners:
        return corners
    h, w = f.shape
    out = []
    xs = np.array([int(c.x) for c in corners])
    ys = np.array([int(c.y) for c in corners])
    interior = (xs >= 4) & (xs < w - 4) & (ys >= 4) & (ys < h - 4)
    # score the full 3x3 neighborhood of every corner in one batch
    offs = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    neigh = np.zeros((len(corners), 9))
    for j, (dx, dy) in enumerate(offs):
        sel = interior
        neigh[sel, j] = _fast_scores(f, xs[sel] + dx, ys[sel] + dy, threshold)
    for i, c in enumerate(corners):
        if not interior[i]:
            out.append(c)
            continue
        s = neigh[i].reshape(3, 3)
        gx = 0.5 * (s[1, 2] - s[1, 0])
        gy = 0.5 * (s[2, 1] - s[0, 1])
        hxx = s[1, 2] - 2 * s[1, 1] + s[1, 0]
        hyy = s[2, 1] - 2 * s[1, 1] + s[0, 1]
        hxy = 0.25 * (s[2, 2] - s[2, 0] - s[0, 2] + s[0, 0])
        det = hxx * hyy - hxy * hxy
        if det <= 1e-9 or hxx >= 0:
            out.append(c)
            continue
        ox = -(hyy * gx - hxy * gy) / det
        oy = -(hxx * gy - hxy * gx) / det
        if abs(ox) > 0.5 or abs(oy) > 0.5:
            out.append(c)
            continue
        out.append(Corner(c.x + ox, c.y + oy, c.score, c.level))
    return out


def describe_brief(img: GrayImage, corner: Corner) -> np.ndarray:
    """256-bit BRIEF descriptor, packed into 32 bytes.

    The 31x31 patch around the corner is box-smoothed (9x9) before the
    intensity comparisons; the test pattern is the fixed module-level table.
    """
    half = BRIEF_PATCH // 2
    x = int(round(corner.x))
    y = int(round(corner.y))
    if not (half <= x < img.width - half and half <= y < img.height - half):
        raise PatchOutOfBounds(f"corner ({x}, {y}) too close to the border")
    patch = img.floats[y - half : y + half + 1, x - half : x + half + 1]
    smooth = uniform_filter(patch, size=BRIEF_SMOOTH, mode="nearest")
    a = smooth[BRIEF_PATTERN[:, 1] + half, BRIEF_PATTERN[:, 0] + half]
    b = smooth[BRIEF_PATTERN[:, 3] + half, BRIEF_PATTERN[:, 2] + half]
    return np.packbits(a < b)


def describe_many(img: GrayImage, corners: list[Corner]) -> tuple[np.ndarray, list[int]]:
    """Descriptors for all corners far enough from the border.

    Returns ((M, 32) uint8 array, list of surviving corner indices).
    """
    half = BRIEF_PATCH // 2
    keep = []
    for i, c in enumerate(corners):
        x, y = int(round(c.x)), int(round(c.y))
        if half <= x < img.width - half and half <= y < img.height - half:
            keep.append(i)
    if not keep:
        return np.empty((0, 32), dtype=np.uint8), []
    xs = np.array([int(round(corners[i].x)) for i in keep])
    ys = np.array([int(round(corners[i].y)) for i in keep])
    span = np.arange(-half, half + 1)
    patches = img.floats[
        (ys[:, None, None] + span[None, :, None]),
        (xs[:, None, None] + span[None, None, :]),
    ]
    smooth = uniform_filter(patches, size=(1, BRIEF_SMOOTH, BRIEF_SMOOTH), mode="nearest")
    a = smooth[:, BRIEF_PATTERN[:, 1] + half, BRIEF_PATTERN[:, 0] + half]
    b = smooth[:, BRIEF_PATTERN[:, 3] + half, BRIEF_PATTERN[:, 2] + half]
    return np.packbits(a < b, axis=1), keep


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    return int(_POPCOUNT[np.bitwise_xor(a, b)].sum())


def hamming_matrix(query: np.ndarray, train: np.ndarray) -> np.ndarray:
    """All-pairs Hamming distances between two packed descriptor stacks."""
    x = np.bitwise_xor(query[:, None, :], train[None, :, :])
    return _POPCOUNT[x].sum(axis=2)


def match_descriptors(query: np.ndarray, train: np.ndarray, max_distance: int = 64) -> MatchSet:
    """Mutual-nearest Hamming matching with a distance gate.

    Each query is paired with its nearest train descriptor; the pair is kept
    only if the distance is within ``max_distance`` and the train descriptor's
    nearest query is the same one (cross-check).  Ties resolve to the lowest
    index, so the result is deterministic and one-to-one.
    """
    query = np.asarray(query, dtype=np.uint8).reshape(-1, 32)
    train = np.asarray(train, dtype=np.uint8).reshape(-1, 32)
    if len(query) == 0 or len(train) == 0:
        return MatchSet()
    d = hamming_matrix(query, train)
    nearest_t = d.argmin(axis=1)
    nearest_q = d.argmin(axis=0)
    qi = np.arange(len(query))
    mutual = nearest_q[nearest_t] == qi
    dist = d[qi, nearest_t]
    keep = mutual & (dist <= max_distance)
    return MatchSet(
        qi[keep].astype(np.intp),
        nearest_t[keep].astype(np.intp),
        dist[keep].astype(np.uint16),
    )
