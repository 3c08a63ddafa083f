"""Grayscale images, pyramids, subpixel sampling, and binary PGM I/O.

Images are stored as 8-bit samples and promoted to float for arithmetic.
Pixel (x, y) has its center at coordinate (x, y); bilinear sampling is valid
on [0, w-2] x [0, h-2].
"""

from __future__ import annotations

import numpy as np

from .errors import OutOfBounds, TooSmall

MIN_LEVEL_SIZE = 16


class GrayImage:
    """8-bit grayscale raster with a cached float view for arithmetic."""

    __slots__ = ("pixels", "_floats")

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels)
        if pixels.ndim != 2:
            raise ValueError("expected a 2D array")
        if pixels.dtype != np.uint8:
            pixels = np.clip(np.rint(pixels), 0, 255).astype(np.uint8)
        self.pixels = pixels
        self._floats = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def floats(self) -> np.ndarray:
        if self._floats is None:
            self._floats = self.pixels.astype(np.float64)
        return self._floats

    def shift(self, dx: int, dy: int) -> "GrayImage":
        """Integer translation with edge replication (test helper)."""
        out = np.roll(np.roll(self.pixels, dy, axis=0), dx, axis=1)
        return GrayImage(out)


def write_pgm(img: GrayImage, path) -> None:
    """Binary PGM (P5, maxval 255)."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.pixels.tobytes())


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval, single whitespace, then raster
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return GrayImage(raster.reshape(h, w).copy())


class Pyramid:
    """Image pyramid, level 0 at full resolution, scale factor 0.5 per level."""

    __slots__ = ("levels",)

    scale = 0.5

    def __init__(self, levels):
        self.levels = list(levels)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i) -> GrayImage:
        return self.levels[i]


def _box_downsample(img: GrayImage) -> GrayImage:
    f = img.floats
    h2, w2 = img.height // 2, img.width // 2
    f = f[: 2 * h2, : 2 * w2]
    down = 0.25 * (f[0::2, 0::2] + f[1::2, 0::2] + f[0::2, 1::2] + f[1::2, 1::2])
    return GrayImage(down)


def build_pyramid(img: GrayImage, levels: int) -> Pyramid:
    """2x2 box filter and decimate-by-2 pyramid.

    Raises TooSmall if any level would fall below 16x16 pixels.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    w, h = img.width, img.height
    if (w >> (levels - 1)) < MIN_LEVEL_SIZE or (h >> (levels - 1)) < MIN_LEVEL_SIZE:
        raise TooSmall(
            f"{w}x{h} image cannot support {levels} levels (min {MIN_LEVEL_SIZE}px)"
        )
    out = [img]
    for _ in range(levels - 1):
        out.append(_box_downsample(out[-1]))
    return Pyramid(out)


def sample_bilinear(img: GrayImage, p) -> float:
    """Bilinear interpolation of the four neighbors of subpixel point p."""
    x, y = float(p[0]), float(p[1])
    if not (0.0 <= x <= img.width - 2 and 0.0 <= y <= img.height - 2):
        raise OutOfBounds(f"({x}, {y}) outside [0, {img.width - 2}]x[0, {img.height - 2}]")
    f = img.floats
    x0, y0 = int(x), int(y)
    ax, ay = x - x0, y - y0
    return float(
        (1 - ax) * (1 - ay) * f[y0, x0]
        + ax * (1 - ay) * f[y0, x0 + 1]
        + (1 - ax) * ay * f[y0 + 1, x0]
        + ax * ay * f[y0 + 1, x0 + 1]
    )


def sample_bilinear_many(f: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Vectorized bilinear sampling on a float image array.

    Coordinates must already be in bounds; callers clip/mask beforehand.
    Returns (values, d/dx, d/dy) of the interpolated surface; the derivatives
    are the exact in-cell derivatives of the bilinear interpolant.
    """
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    ax = xs - x0
    ay = ys - y0
    i00 = f[y0, x0]
    i10 = f[y0, x0 + 1]
    i01 = f[y0 + 1, x0]
    i11 = f[y0 + 1, x0 + 1]
    top = i00 + ax * (i10 - i00)
    bot = i01 + ax * (i11 - i01)
    val = top + ay * (bot - top)
    gx = (1 - ay) * (i10 - i00) + ay * (i11 - i01)
    gy = (1 - ax) * (i01 - i00) + ax * (i11 - i10)
    return val, gx, gy


def gradient(img: GrayImage, p) -> np.ndarray:
    """Central-difference intensity gradient from bilinear samples, per pixel."""
    x, y = float(p[0]), float(p[1])
    if not (1.0 <= x <= img.width - 3 and 1.0 <= y <= img.height - 3):
        raise OutOfBounds(f"({x}, {y}) too close to the border for a central difference")
    gx = 0.5 * (sample_bilinear(img, (x + 1, y)) - sample_bilinear(img, (x - 1, y)))
    gy = 0.5 * (sample_bilinear(img, (x, y + 1)) - sample_bilinear(img, (x, y - 1)))
    return np.array([gx, gy])
