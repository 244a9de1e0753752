"""Flow replacement near motion boundaries.

For every boundary pixel ``b`` with a usable brightness normal ``u`` the
flow is probed along ``b + d*u`` in both directions to find the first
"safe" distance where it stops changing quickly.  If the side with the
smaller motion differs enough from the other side, pixels between ``b``
and that side's safe point ``q`` take the flow found at ``q``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    as_flow,
    as_image,
    bilinear_sample,
    brightness_gradient,
    check_same_grid,
    luminance,
)

# Below this both sides of the ratio count as zero.
ZERO_CHANGE = 1e-9
_IN_FRAME_SLACK = 1e-9


@dataclass(frozen=True)
class RefineParams:
    tau: float = 0.2
    alpha: float = 0.2
    d_max: int = 20
    grad_eps: float = 1e-3

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if int(self.d_max) != self.d_max or self.d_max < 2:
            raise ValueError(f"d_max must be an integer >= 2, got {self.d_max}")
        if not self.grad_eps >= 0:
            raise ValueError(f"grad_eps must be non-negative, got {self.grad_eps}")


@dataclass(frozen=True)
class ReplacementAssignment:
    """Pixel ``p`` on the ray from ``b`` along ``u`` takes the flow found at ``q``."""

    b: tuple
    u: tuple
    d_star: int
    d: int
    p: tuple
    q: tuple
    replacement_flow: tuple

    @property
    def target(self):
        """Integer pixel ``(x, y)`` nearest to ``p``."""
        return (int(np.floor(self.p[0] + 0.5)), int(np.floor(self.p[1] + 0.5)))


def boundary_normal(frame2, b, grad_eps=1e-3):
    """Unit brightness-gradient direction at ``b``, or ``None`` if the gradient is too weak."""
    grad = brightness_gradient(luminance(frame2))
    g = bilinear_sample(grad, b[0], b[1])
    mag = float(np.hypot(g[0], g[1]))
    if mag < grad_eps or mag == 0.0:
        return None
    return (float(g[0] / mag), float(g[1] / mag))


def _qualifies(num, den, tau):
    zero_den = den < ZERO_CHANGE
    ratio = num / np.where(zero_den, 1.0, den)
    return np.where(zero_den, num < ZERO_CHANGE, ratio < tau)


def _norm2(vec):
    return np.sqrt(vec[..., 0] * vec[..., 0] + vec[..., 1] * vec[..., 1])


def first_safe_distance(profiles, n_allowed, tau):
    """Smallest qualifying ``d`` per ray, 0 where none qualifies.

    ``profiles`` has shape ``(N, K, 2)`` with ``profiles[:, d-1]`` holding
    the flow at distance ``d``; only ``d <= n_allowed`` (and ``d <= K-1``)
    is considered.
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    n, k = profiles.shape[:2]
    if k < 2:
        return np.zeros(n, dtype=int)
    num = _norm2(profiles[:, :-1] - profiles[:, 1:])          # |f(d) - f(d+1)|, d = 1..K-1
    den = _norm2(profiles[:, :1] - profiles[:, :-1])          # |f(1) - f(d)|
    ok = _qualifies(num, den, tau)
    d = np.arange(1, k)
    ok &= d[None, :] <= np.asarray(n_allowed)[:, None]
    first = np.argmax(ok, axis=1) + 1
    return np.where(ok.any(axis=1), first, 0)


def safe_distance_from_profile(profile, tau=0.2, d_max=20):
    """Smallest safe distance for an explicit ray profile ``[f(1), f(2), ...]``."""
    profile = np.asarray(profile, dtype=np.float64).reshape(1, -1, 2)
    d = int(first_safe_distance(profile, [d_max], tau)[0])
    return d or None


def _ray_profiles(flow, bx, by, ux, uy, d_max):
    """Flow samples at ``b + d*u`` for d = 1..d_max+1 and the usable scan length."""
    h, w = flow.shape[:2]
    d = np.arange(1, d_max + 2, dtype=np.float64)
    px = bx[:, None] + d[None, :] * ux[:, None]
    py = by[:, None] + d[None, :] * uy[:, None]
    samples = bilinear_sample(flow, px, py)
    inside = ((px >= -_IN_FRAME_SLACK) & (px <= w - 1 + _IN_FRAME_SLACK)
              & (py >= -_IN_FRAME_SLACK) & (py <= h - 1 + _IN_FRAME_SLACK))
    # d is usable only when the segment up to d+1 stays in frame.
    usable = inside[:, 1:]
    n_allowed = np.where(usable.all(axis=1), d_max, np.argmin(usable, axis=1))
    return samples, n_allowed


def safe_distance(flow, b, u, params=RefineParams()):
    """Smallest safe distance along the ray ``b + d*u``, or ``None``."""
    flow = as_flow(flow)
    samples, n_allowed = _ray_profiles(
        flow, np.array([float(b[0])]), np.array([float(b[1])]),
        np.array([float(u[0])]), np.array([float(u[1])]), int(params.d_max))
    d = int(first_safe_distance(samples, n_allowed, params.tau)[0])
    return d or None


def _assign_block(flow, bx, by, ux, uy, params):
    d_max = int(params.d_max)
    prof_pos, allow_pos = _ray_profiles(flow, bx, by, ux, uy, d_max)
    prof_neg, allow_neg = _ray_profiles(flow, bx, by, -ux, -uy, d_max)
    d_pos = first_safe_distance(prof_pos, allow_pos, params.tau)
    d_neg = first_safe_distance(prof_neg, allow_neg, params.tau)
    out = []
    for i in np.nonzero((d_pos > 0) & (d_neg > 0))[0].tolist():
        f_q = prof_pos[i, d_pos[i] - 1]
        f_q2 = prof_neg[i, d_neg[i] - 1]
        sign, d_star = 1.0, int(d_pos[i])
        n_q, n_q2 = float(_norm2(f_q)), float(_norm2(f_q2))
        if n_q2 < n_q:
            f_q, f_q2 = f_q2, f_q
            n_q, n_q2 = n_q2, n_q
            sign, d_star = -1.0, int(d_neg[i])
        if not n_q < n_q2:
            continue
        if not float(_norm2(f_q - f_q2)) >= params.alpha * n_q:
            continue
        b = (float(bx[i]), float(by[i]))
        u = (sign * float(ux[i]), sign * float(uy[i]))
        q = (b[0] + d_star * u[0], b[1] + d_star * u[1])
        rep = (float(f_q[0]), float(f_q[1]))
        for d in range(1, d_star):
            p = (b[0] + d * u[0], b[1] + d * u[1])
            out.append(ReplacementAssignment(b, u, d_star, d, p, q, rep))
    return out


def replacement_set(flow, boundaries, frame2, params=RefineParams(), jobs=1):
    """All replacement assignments generated by the boundary pixels.

    Boundary pixels are visited in row-major order; assignments from one
    pixel are ordered by increasing distance.
    """
    flow = as_flow(flow)
    boundaries = np.asarray(boundaries, dtype=bool)
    frame2 = as_image(frame2, "frame2")
    check_same_grid(("flow", flow), ("boundaries", boundaries), ("frame2", frame2))
    grad = brightness_gradient(luminance(frame2))
    mag = np.hypot(grad[:, :, 0], grad[:, :, 1])
    rows, cols = np.nonzero(boundaries & (mag >= params.grad_eps) & (mag > 0))
    if rows.size == 0:
        return []
    ux = grad[rows, cols, 0] / mag[rows, cols]
    uy = grad[rows, cols, 1] / mag[rows, cols]
    bx = cols.astype(np.float64)
    by = rows.astype(np.float64)

    jobs = max(1, int(jobs))
    bounds = np.linspace(0, rows.size, jobs + 1).astype(int)
    blocks = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def run(sl):
        return _assign_block(flow, bx[sl], by[sl], ux[sl], uy[sl], params)

    if len(blocks) == 1:
        return run(blocks[0])
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(run, blocks))
    return [a for part in parts for a in part]


def refine_flow(flow, assignments):
    """Copy of ``flow`` with every assignment target overwritten.

    When several assignments hit the same pixel, the one whose boundary
    point is nearest wins (ties go to the boundary point earlier in
    row-major order).
    """
    src = np.asarray(flow)
    out = src.copy()
    h, w = src.shape[:2]
    best = {}
    for a in assignments:
        tx, ty = a.target
        if not (0 <= tx < w and 0 <= ty < h):
            continue
        bx, by = a.b
        key = ((tx - bx) ** 2 + (ty - by) ** 2, by * w + bx)
        cur = best.get((ty, tx))
        if cur is None or key < cur[0]:
            best[(ty, tx)] = (key, a.replacement_flow)
    for (ty, tx), (_, rep) in best.items():
        out[ty, tx] = rep
    return out


def replaced_mask(shape, assignments):
    """Boolean map of the pixels targeted by ``assignments``."""
    mask = np.zeros(shape[:2], dtype=bool)
    for a in assignments:
        tx, ty = a.target
        if 0 <= tx < shape[1] and 0 <= ty < shape[0]:
            mask[ty, tx] = True
    return mask
