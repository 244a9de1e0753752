"""Raster primitives shared by the rest of the package.

Conventions
-----------
* Images are float arrays of shape ``(H, W, C)`` with ``C`` in {1, 3} and
  values in [0, 1].  2-D arrays are accepted wherever an image is expected
  and treated as single-channel.
* Flow fields are float arrays of shape ``(H, W, 2)`` holding ``(u, v)``
  displacements in pixels/frame.  Sparse flows carry a separate boolean
  ``valid`` mask of shape ``(H, W)``.
* Binary maps are boolean arrays of shape ``(H, W)``.
* Pixel centres sit at integer coordinates; ``x`` indexes columns and ``y``
  rows.  Points are plain ``(x, y)`` tuples.
"""

from collections import deque

import numpy as np
from scipy import ndimage

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_NEIGHBOURS_8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class ShapeMismatchError(ValueError):
    """Raised when rasters that must share a grid do not."""


def as_image(image, name="image"):
    """Validate an image and return it as a float64 ``(H, W, C)`` array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have shape (H, W), (H, W, 1) or (H, W, 3); got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must be finite and within [0, 1]")
    return arr


def as_flow(flow, name="flow"):
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name} must have shape (H, W, 2); got {arr.shape}")
    return arr


def check_same_grid(*named):
    """Raise ShapeMismatchError unless every ``(name, array)`` shares ``(H, W)``."""
    named = [(n, a) for n, a in named if a is not None]
    if not named:
        return
    ref_name, ref = named[0]
    for n, a in named[1:]:
        if a.shape[:2] != ref.shape[:2]:
            raise ShapeMismatchError(
                f"{n} has size {a.shape[1]}x{a.shape[0]} but {ref_name} is "
                f"{ref.shape[1]}x{ref.shape[0]} (width x height)"
            )


def luminance(image):
    """Rec.601 luminance of an RGB image as an ``(H, W)`` array.

    Single-channel input is returned unchanged (squeezed to 2-D).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[:, :, 0]
    r, g, b = LUMA_WEIGHTS
    return r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]


def bilinear_sample(field, x, y):
    """Sample ``field`` at subpixel positions with bilinear interpolation.

    Parameters
    ----------
    field : ndarray, shape (H, W) or (H, W, C)
    x, y : float or ndarray
        Column and row coordinates; arrays must broadcast together.
        Coordinates outside ``[0, W-1] x [0, H-1]`` are clamped to the border.

    Returns
    -------
    ndarray
        Shape ``broadcast(x, y).shape`` for a 2-D field, with a trailing
        channel axis appended for a 3-D field.
    """
    field = np.asarray(field)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("sample coordinates must be finite")
    h, w = field.shape[:2]
    x = np.clip(x, 0.0, w - 1)
    y = np.clip(y, 0.0, h - 1)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if field.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = (1.0 - fx) * field[y0, x0] + fx * field[y0, x1]
    bottom = (1.0 - fx) * field[y1, x0] + fx * field[y1, x1]
    return (1.0 - fy) * top + fy * bottom


def _sobel(plane):
    """Sobel derivatives scaled by 1/8 (a unit ramp gives a unit gradient).

    Written as smoothed central differences so flat regions give exact zeros.
    """
    p = np.pad(plane, 1, mode="edge")
    h, w = plane.shape
    cols = p[0:h, :] + 2.0 * p[1:h + 1, :] + p[2:h + 2, :]
    rows = p[:, 0:w] + 2.0 * p[:, 1:w + 1] + p[:, 2:w + 2]
    gx = (cols[:, 2:w + 2] - cols[:, 0:w]) / 8.0
    gy = (rows[2:h + 2, :] - rows[0:h, :]) / 8.0
    return gx, gy


def brightness_gradient(gray):
    """Per-pixel brightness gradient ``(g_x, g_y)`` by a normalised 3x3 Sobel.

    ``gray`` must be single-channel, ``(H, W)`` or ``(H, W, 1)``.  Borders
    use replicated padding.  Returns an ``(H, W, 2)`` array in
    intensity/pixel.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.ndim == 3:
        if g.shape[2] != 1:
            raise ValueError("brightness_gradient expects a single-channel image; convert with luminance()")
        g = g[:, :, 0]
    return np.stack(_sobel(g), axis=-1)


def distance_transform(mask, return_indices=False):
    """Exact Euclidean distance from every pixel to the nearest true pixel.

    An all-false mask yields ``inf`` everywhere.  With ``return_indices``,
    also returns an ``(2, H, W)`` int array of the nearest true pixel's
    ``(row, col)``; it is ``-1`` for an all-false mask.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        dist = np.full(mask.shape, np.inf)
        if return_indices:
            return dist, np.full((2,) + mask.shape, -1, dtype=np.intp)
        return dist
    if return_indices:
        dist, idx = ndimage.distance_transform_edt(~mask, return_indices=True)
        return dist, idx
    return ndimage.distance_transform_edt(~mask)


def grow_from_seeds(seeds, allowed):
    """Pixels of ``allowed`` that are 8-connected, through ``allowed``, to a seed.

    Seeds are always part of the result.  Breadth-first flood fill; each
    pixel is visited at most once.
    """
    seeds = np.asarray(seeds, dtype=bool)
    allowed = np.asarray(allowed, dtype=bool) | seeds
    h, w = seeds.shape
    out = seeds.copy()
    rows, cols = np.nonzero(seeds)
    queue = deque(zip(rows.tolist(), cols.tolist()))
    allowed_l = allowed.tolist()
    out_l = out.tolist()
    while queue:
        r, c = queue.popleft()
        for dr, dc in _NEIGHBOURS_8:
            rr = r + dr
            cc = c + dc
            if 0 <= rr < h and 0 <= cc < w and allowed_l[rr][cc] and not out_l[rr][cc]:
                out_l[rr][cc] = True
                queue.append((rr, cc))
    return np.array(out_l, dtype=bool).reshape(h, w)
