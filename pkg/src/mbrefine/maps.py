"""Evidence maps for motion-boundary detection.

Three boolean maps feed the detector:

* ``edge_map`` -- image edges (Canny-style, or an externally computed map),
* ``motion_discrepancy_map`` -- thresholded flow Jacobian norm,
* ``ism_map`` -- invalid smooth motion, from asymmetric patch-matching costs
  measured on the two sides of an edge pixel.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    as_flow,
    as_image,
    bilinear_sample,
    brightness_gradient,
    check_same_grid,
    grow_from_seeds,
    luminance,
)

# 3x3 patch offsets in row-major order.
PATCH_OFFSETS = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class IsmParams:
    sigma: float = 5.0
    theta_ism: float = 0.2
    grad_eps: float = 1e-3

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.theta_ism > 0:
            raise ValueError(f"theta_ism must be positive, got {self.theta_ism}")
        if not self.grad_eps >= 0:
            raise ValueError(f"grad_eps must be non-negative, got {self.grad_eps}")


# -- patch features and correlation ------------------------------------------

def patch_features(image, x, y):
    """Mean-centred 3x3 patch features at many (subpixel) centres.

    ``x`` and ``y`` are 1-D arrays of length N.  Returns an ``(N, 9 * C)``
    array; each channel has its own mean removed.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    samples = [bilinear_sample(image, x + dx, y + dy) for dx, dy in PATCH_OFFSETS]
    # Explicit accumulation keeps results independent of batch size.
    total = samples[0].copy()
    for s in samples[1:]:
        total += s
    mean = total / len(samples)
    centred = np.stack([s - mean for s in samples], axis=1)  # (N, 9, C)
    return centred.reshape(len(x), -1)


def patch_feature(image, center):
    """Feature vector of the 3x3 patch around ``center = (x, y)``."""
    cx, cy = center
    return patch_features(image, [cx], [cy])[0]


def similarity(f_p, f_q):
    """Pearson correlation of two centred features, in [-1, 1].

    Works along the last axis.  A (near) zero-variance feature gives 0.
    """
    f_p = np.asarray(f_p, dtype=np.float64)
    f_q = np.asarray(f_q, dtype=np.float64)
    if f_p.shape[-1] != f_q.shape[-1]:
        raise ValueError(f"feature lengths differ: {f_p.shape[-1]} vs {f_q.shape[-1]}")
    dot = _rowsum(f_p * f_q)
    n_p = np.sqrt(_rowsum(f_p * f_p))
    n_q = np.sqrt(_rowsum(f_q * f_q))
    degenerate = (n_p < _NORM_FLOOR) | (n_q < _NORM_FLOOR)
    denom = np.where(degenerate, 1.0, n_p * n_q)
    s = np.where(degenerate, 0.0, np.clip(dot / denom, -1.0, 1.0))
    return float(s) if s.ndim == 0 else s


def _rowsum(a):
    # Sequential sum over the last axis; deterministic for any leading shape.
    out = np.zeros(a.shape[:-1])
    for k in range(a.shape[-1]):
        out = out + a[..., k]
    return out


def matching_costs(image_i, image_j, px, py, vx, vy):
    """Vectorised ``c_ij(p, v) = -s(f_i(p), f_j(p + v))``."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    f_i = patch_features(image_i, px, py)
    f_j = patch_features(image_j, px + vx, py + vy)
    return -similarity(f_i, f_j)


def matching_cost(image_i, image_j, p, v):
    """Cost of matching point ``p`` of ``image_i`` to ``p + v`` in ``image_j``."""
    return float(matching_costs(image_i, image_j, [p[0]], [p[1]], [v[0]], [v[1]])[0])


def bidirectional_costs(frame1, frame2, frame3, flow21, flow23, xx, xy, yx, yy):
    """Vectorised cost of point x under the motion estimated at point y.

    The forward cost uses ``flow23`` sampled at y; when ``frame1`` and
    ``flow21`` are given the result is the smaller of the forward and
    backward costs.
    """
    fwd = bilinear_sample(flow23, yx, yy)
    cost = matching_costs(frame2, frame3, xx, xy, fwd[:, 0], fwd[:, 1])
    if frame1 is not None and flow21 is not None:
        bwd = bilinear_sample(flow21, yx, yy)
        cost = np.minimum(cost, matching_costs(frame2, frame1, xx, xy, bwd[:, 0], bwd[:, 1]))
    return cost


def bidirectional_cost(frame1, frame2, frame3, flow21, flow23, x, y):
    """Cost of point ``x`` under the motion estimated at point ``y``."""
    return float(
        bidirectional_costs(frame1, frame2, frame3, flow21, flow23, [x[0]], [x[1]], [y[0]], [y[1]])[0]
    )


# -- invalid smooth motion ---------------------------------------------------

def ism_scores(frame1, frame2, frame3, flow21, flow23, bx, by, ux, uy, sigma):
    """``max(m_ac - m_cc, m_ca - m_aa)`` at boundary candidates ``b`` with normals ``u``."""
    ax, ay = bx + sigma * ux, by + sigma * uy
    cx, cy = bx - sigma * ux, by - sigma * uy

    def cost(x_x, x_y, y_x, y_y):
        return bidirectional_costs(frame1, frame2, frame3, flow21, flow23, x_x, x_y, y_x, y_y)

    m_aa = cost(ax, ay, ax, ay)
    m_ac = cost(ax, ay, cx, cy)
    m_ca = cost(cx, cy, ax, ay)
    m_cc = cost(cx, cy, cx, cy)
    return np.maximum(m_ac - m_cc, m_ca - m_aa)


def ism_map(frame1, frame2, frame3, flow21, flow23, candidates, params=IsmParams(), jobs=1):
    """Invalid-smooth-motion map evaluated at the ``candidates`` pixels.

    ``frame1`` and ``flow21`` may be ``None``, in which case only the forward
    costs are used.  Candidates whose brightness gradient magnitude does not
    exceed ``params.grad_eps``, or whose side points ``b +- sigma*u`` leave
    the frame, are false.
    """
    frame2 = as_image(frame2, "frame2")
    frame3 = as_image(frame3, "frame3")
    flow23 = as_flow(flow23, "flow23")
    if frame1 is not None and flow21 is not None:
        frame1 = as_image(frame1, "frame1")
        flow21 = as_flow(flow21, "flow21")
    else:
        frame1 = flow21 = None
    candidates = np.asarray(candidates, dtype=bool)
    check_same_grid(("frame2", frame2), ("frame3", frame3), ("flow23", flow23),
                    ("frame1", frame1), ("flow21", flow21), ("candidates", candidates))
    if frame2.shape[2] != frame3.shape[2] or (frame1 is not None and frame1.shape[2] != frame2.shape[2]):
        raise ValueError("frames must have the same number of channels")

    grad = brightness_gradient(luminance(frame2))
    mag = np.hypot(grad[:, :, 0], grad[:, :, 1])
    rows, cols = np.nonzero(candidates & (mag > params.grad_eps))
    out = np.zeros(candidates.shape, dtype=bool)
    if rows.size == 0:
        return out
    gx = grad[rows, cols, 0] / mag[rows, cols]
    gy = grad[rows, cols, 1] / mag[rows, cols]
    bx = cols.astype(np.float64)
    by = rows.astype(np.float64)
    # Side points off the frame would compare clamped, flat patches; skip them.
    h, w = candidates.shape
    reach_x = params.sigma * np.abs(gx)
    reach_y = params.sigma * np.abs(gy)
    inside = ((bx - reach_x >= 0) & (bx + reach_x <= w - 1) & (by - reach_y >= 0) & (by + reach_y <= h - 1))
    rows, cols, gx, gy, bx, by = (a[inside] for a in (rows, cols, gx, gy, bx, by))
    if rows.size == 0:
        return out

    def run(sl):
        return ism_scores(frame1, frame2, frame3, flow21, flow23,
                          bx[sl], by[sl], gx[sl], gy[sl], params.sigma)

    scores = _chunked(run, rows.size, jobs)
    out[rows, cols] = scores > params.theta_ism
    return out


def _chunked(fn, n, jobs):
    """Apply ``fn`` to slices covering ``range(n)`` and concatenate in order."""
    jobs = max(1, int(jobs))
    if jobs == 1 or n < 2 * jobs:
        return fn(slice(0, n))
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    slices = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(fn, slices))
    return np.concatenate(parts)


# -- motion discrepancy ------------------------------------------------------

def flow_gradient_magnitude(flow):
    """Frobenius norm of the flow Jacobian by central differences (replicated borders)."""
    flow = as_flow(flow)
    padded = np.pad(flow, ((1, 1), (1, 1), (0, 0)), mode="edge")
    d_dx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    d_dy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return np.sqrt(np.sum(d_dx ** 2, axis=-1) + np.sum(d_dy ** 2, axis=-1))


def motion_discrepancy_map(flow, theta_md):
    """Pixels where the flow Jacobian norm exceeds ``theta_md``."""
    if not theta_md > 0:
        raise ValueError(f"theta_md must be positive, got {theta_md}")
    return flow_gradient_magnitude(flow) > theta_md


# -- image edges -------------------------------------------------------------

def non_maximum_suppression(magnitude, grad, tie_tol=0.05):
    """Thin a gradient-magnitude map along the quantised gradient direction.

    The gradient direction is quantised to the 8 neighbour directions.  A
    pixel survives when it beats its uphill neighbour (along the gradient)
    by more than the factor ``1 + tie_tol`` and is not beaten by its
    downhill neighbour by that factor.  Near-ties, as on the two pixels
    straddling a step, therefore resolve to the brighter side and edges
    do not zig-zag with texture noise.
    """
    h, w = magnitude.shape
    padded = np.pad(magnitude, 1, mode="constant")
    angle = np.degrees(np.arctan2(grad[:, :, 1], grad[:, :, 0])) % 360.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 8
    # (dx, dy) for 0, 45, ..., 315 degrees; y grows downwards.
    steps = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
    keep = np.zeros((h, w), dtype=bool)
    for k, (dx, dy) in enumerate(steps):
        fwd = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        bwd = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        sel = sector == k
        keep |= sel & (magnitude * (1.0 + tie_tol) >= bwd) & (magnitude > fwd * (1.0 + tie_tol))
    return keep


def canny_edges(image, low, high, smoothing=1.0, tie_tol=0.05):
    """Canny-style edges: smoothing, Sobel gradient, NMS and hysteresis."""
    if not 0 <= low <= high:
        raise ValueError(f"need 0 <= low <= high, got low={low}, high={high}")
    gray = luminance(as_image(image))
    if smoothing > 0:
        gray = ndimage.gaussian_filter(gray, smoothing, mode="nearest")
    grad = brightness_gradient(gray)
    mag = np.hypot(grad[:, :, 0], grad[:, :, 1])
    thin = non_maximum_suppression(mag, grad, tie_tol) & (mag > 0)
    strong = thin & (mag >= high)
    weak = thin & (mag >= low)
    return grow_from_seeds(strong, weak)


def edge_map(image, low=0.04, high=0.08, smoothing=1.0, external=None, tie_tol=0.05):
    """Image edge map.

    With ``external`` (a grayscale map in [0, 1], e.g. from a learned
    detector) the result is ``external >= 0.5``; otherwise the built-in
    Canny-style detector is run on ``image``.
    """
    if external is not None:
        ext = np.asarray(external, dtype=np.float64)
        if ext.ndim == 3:
            ext = luminance(ext)
        if image is not None:
            check_same_grid(("image", np.asarray(image)), ("external edge map", ext))
        return ext >= 0.5
    return canny_edges(image, low, high, smoothing, tie_tol)
