"""Pyramidal inverse-compositional Lucas-Kanade optical flow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import Pyramid, sample_bilinear_many

LK_WINDOW = 11
LK_MAX_ITERS = 30
LK_TOL = 0.01  # convergence when the update falls below this many pixels
LK_MIN_EIG = 1e-4  # per-pixel floor on the structure tensor's min eigenvalue


@dataclass
class FlowResult:
    positions: np.ndarray  # (N, 2) tracked positions at level 0
    converged: np.ndarray  # (N,) bool


def _window_offsets(window: int) -> tuple[np.ndarray, np.ndarray]:
    half = window // 2
    span = np.arange(-half, half + 1, dtype=float)
    ox, oy = np.meshgrid(span, span)
    return ox.ravel(), oy.ravel()


def lk_flow(
    prev: Pyramid,
    cur: Pyramid,
    points: np.ndarray,
    init: np.ndarray | None = None,
    window: int = LK_WINDOW,
    max_iters: int = LK_MAX_ITERS,
    tol: float = LK_TOL,
) -> FlowResult:
    """Track ``points`` from the previous to the current pyramid.

    ``init`` seeds the level-0 position estimate in the current image
    (defaults to the source points, i.e. a zero-flow prior).  Tracking runs
    coarse to fine; at each level the template window is resampled around the
    source position and the target position refined with an
    inverse-compositional translation model.  A point converges only if the
    final-level update drops below ``tol`` with a well-conditioned template
    structure tensor and an in-bounds window.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    if init is None:
        init = points.copy()
    init = np.asarray(init, dtype=float).reshape(-1, 2)
    if init.shape != points.shape:
        raise ValueError("init must match points in shape")
    if n == 0:
        return FlowResult(np.empty((0, 2)), np.empty(0, dtype=bool))

    levels = len(prev)
    ox, oy = _window_offsets(window)
    npix = len(ox)
    pos = init / (2.0 ** (levels - 1))  # estimates in current-level coords
    alive = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)

    for level in range(levels - 1, -1, -1):
        scale = 2.0**level
        pf = prev[level].floats
        cf = cur[level].floats
        h, w = pf.shape
        src = points / scale

        in_tmpl = (
            (src[:, 0] + ox.min() >= 0)
            & (src[:, 0] + ox.max() <= w - 2)
            & (src[:, 1] + oy.min() >= 0)
            & (src[:, 1] + oy.max() <= h - 2)
        )
        idx = np.nonzero(alive & in_tmpl)[0]
        if len(idx) > 0:
            tmpl, gx, gy = sample_bilinear_many(
                pf, src[idx, 0:1] + ox[None, :], src[idx, 1:2] + oy[None, :]
            )
            h11 = np.sum(gx * gx, axis=1)
            h12 = np.sum(gx * gy, axis=1)
            h22 = np.sum(gy * gy, axis=1)
            trace = h11 + h22
            det = h11 * h22 - h12 * h12
            min_eig = 0.5 * (trace - np.sqrt(np.maximum(trace * trace - 4 * det, 0.0)))
            textured = min_eig / npix > LK_MIN_EIG
            alive[idx[~textured]] = False
            idx = idx[textured]

        if len(idx) > 0:
            m = len(idx)
            p = pos[idx].copy()
            t = tmpl[textured]
            jg1, jg2 = gx[textured], gy[textured]
            a11, a12, a22 = h11[textured], h12[textured], h22[textured]
            dd = a11 * a22 - a12 * a12
            done = np.zeros(m, dtype=bool)
            dead = np.zeros(m, dtype=bool)
            for _ in range(max_iters):
                work = np.nonzero(~done & ~dead)[0]
                if len(work) == 0:
                    break
                cx = p[work, 0:1] + ox[None, :]
                cy = p[work, 1:2] + oy[None, :]
                inb = (
                    (cx.min(axis=1) >= 0)
                    & (cx.max(axis=1) <= w - 2)
                    & (cy.min(axis=1) >= 0)
                    & (cy.max(axis=1) <= h - 2)
                )
                dead[work[~inb]] = True
                work = work[inb]
                if len(work) == 0:
                    continue
                curw, _, _ = sample_bilinear_many(
                    cf, p[work, 0:1] + ox[None, :], p[work, 1:2] + oy[None, :]
                )
                r = curw - t[work]
                b1 = np.sum(jg1[work] * r, axis=1)
                b2 = np.sum(jg2[work] * r, axis=1)
                dx = -(a22[work] * b1 - a12[work] * b2) / dd[work]
                dy = -(a11[work] * b2 - a12[work] * b1) / dd[work]
                p[work, 0] += dx
                p[work, 1] += dy
                done[work[np.hypot(dx, dy) < tol]] = True
            pos[idx] = p
            alive[idx[dead]] = False
            if level == 0:
                converged[idx] = done & ~dead

        if level > 0:
            pos *= 2.0

    return FlowResult(pos, converged & alive)
