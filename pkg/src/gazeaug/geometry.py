"""Bilinear warps shared by the saliency and augmentation code.

Resizing uses the half-pixel-center convention: output pixel i samples the
input at (i + 0.5) * in/out - 0.5, clamped to the grid, which keeps content
centered for any scale factor; it is implemented as two cached 1-D
interpolation matrices so the hot augmentation loop stays cheap. Rotation
is about the image center with zero fill outside the original support; a
positive angle rotates content clockwise in the usual top-left-origin
display orientation, so 90 degrees reproduces ``np.rot90(img, k=-1)``
exactly.
"""

from functools import lru_cache

import numpy as np
from scipy import ndimage


@lru_cache(maxsize=256)
def _resize_weights(n_in: int, n_out: int) -> np.ndarray:
    src = np.clip((np.arange(n_out) + 0.5) * n_in / n_out - 0.5, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    weights = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(weights, (rows, lo), 1.0 - frac)
    np.add.at(weights, (rows, hi), frac)
    weights.setflags(write=False)
    return weights


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    in_h, in_w = img.shape
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()
    return _resize_weights(in_h, out_h) @ img @ _resize_weights(in_w, out_w).T


@lru_cache(maxsize=64)
def _centered_grid(h: int, w: int):
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(
        np.arange(h, dtype=np.float64) - cy, np.arange(w, dtype=np.float64) - cx, indexing="ij"
    )
    yy.setflags(write=False)
    xx.setflags(write=False)
    return yy, xx


def rotate_center(image: np.ndarray, angle_deg: float) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if angle_deg == 0.0:
        return img.copy()
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    dy, dx = _centered_grid(h, w)
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    coords = np.empty((2, h, w))
    coords[0] = cy - sin_t * dx + cos_t * dy
    coords[1] = cx + cos_t * dx + sin_t * dy
    return ndimage.map_coordinates(img, coords, order=1, mode="grid-constant", cval=0.0)


def forward_rotate_points(xs, ys, shape, angle_deg):
    """Where do source pixel centers land after :func:`rotate_center`?

    Inverse of the sampling map above: contents at (x, y) move to
    (cx + cos*dx - sin*dy, cy + sin*dx + cos*dy).
    """
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    dx, dy = xs - cx, ys - cy
    return cx + cos_t * dx - sin_t * dy, cy + sin_t * dx + cos_t * dy
