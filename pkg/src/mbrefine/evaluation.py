"""Metrics and analysis curves for boundaries and flow.

All per-point data can be written with :func:`mbrefine.io.write_csv`; the
``*_HEADER`` constants give the matching column names.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    as_flow,
    bilinear_sample,
    brightness_gradient,
    check_same_grid,
    distance_transform,
    luminance,
)

F1_REL_TOL = 0.0075


@dataclass(frozen=True)
class PRStats:
    """Boundary scores.

    ``tp`` counts predicted pixels near a true boundary and ``tp_gt`` true
    boundary pixels near a prediction; ``fn = gt pixels - tp_gt``.
    Precision is ``tp / (tp + fp)`` and recall ``tp_gt / (tp_gt + fn)``.
    """

    tp: int
    fp: int
    fn: int
    tp_gt: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp, fp, fn, tp_gt=None):
        tp_gt = tp if tp_gt is None else tp_gt
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp_gt / (tp_gt + fn) if tp_gt + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(int(tp), int(fp), int(fn), int(tp_gt), precision, recall, f1)

    HEADER = ("tp", "fp", "fn", "tp_gt", "precision", "recall", "f1")

    def row(self):
        return (self.tp, self.fp, self.fn, self.tp_gt, self.precision, self.recall, self.f1)


class DistanceBin(NamedTuple):
    distance: int
    mean_epe: float
    count: int


class DecompositionEntry(NamedTuple):
    c: int
    e: float
    a: float
    r: float
    count: int


DISTANCE_HEADER = DistanceBin._fields
DECOMPOSITION_HEADER = DecompositionEntry._fields
SIDE_PAIR_HEADER = ("bx", "by", "epe_small", "epe_large")


def epe_map(est, gt):
    """Per-pixel end-point error."""
    est = as_flow(est, "estimate")
    gt = as_flow(gt, "ground truth")
    check_same_grid(("estimate", est), ("ground truth", gt))
    diff = est - gt
    return np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)


def epe(est, gt, valid=None, mask=None):
    """Average end-point error over valid (and optionally masked) pixels.

    Returns ``(mean, per_pixel_map)``.
    """
    err = epe_map(est, gt)
    sel = np.ones(err.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    if mask is not None:
        sel = sel & np.asarray(mask, dtype=bool)
    if not sel.any():
        raise ValueError("no valid pixel to average the end-point error over")
    return float(np.sum(err[sel]) / np.count_nonzero(sel)), err


def boundary_f1(pred, gt, rel_tol=F1_REL_TOL):
    """Boundary precision/recall/F1 with a distance tolerance.

    A predicted pixel is a hit when a ground-truth pixel lies within
    ``rel_tol`` times the image diagonal; a ground-truth pixel is missed
    when no prediction lies within that radius.
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    check_same_grid(("prediction", pred), ("ground truth", gt))
    h, w = pred.shape
    radius = rel_tol * np.hypot(w, h)
    tp = np.count_nonzero(pred & (distance_transform(gt) <= radius))
    fp = np.count_nonzero(pred) - tp
    fn = np.count_nonzero(gt & (distance_transform(pred) > radius))
    return PRStats.from_counts(tp, fp, fn, np.count_nonzero(gt) - fn)


def epe_vs_distance(est, gt, gt_mb, max_dist=20, valid=None):
    """Mean EPE binned by integer distance to the nearest true boundary.

    Distances are floored and clipped to ``max_dist``, so the last bin
    collects everything farther away.  Empty bins have ``nan`` means.
    """
    err = epe_map(est, gt)
    gt_mb = np.asarray(gt_mb, dtype=bool)
    check_same_grid(("flow", err), ("boundary map", gt_mb))
    dist = distance_transform(gt_mb)
    bins = np.minimum(np.floor(np.minimum(dist, max_dist)), max_dist).astype(int)
    sel = np.ones(err.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    out = []
    for k in range(max_dist + 1):
        vals = err[sel & (bins == k)]
        mean = float(np.sum(vals) / vals.size) if vals.size else float("nan")
        out.append(DistanceBin(k, mean, int(vals.size)))
    return out


def error_decomposition(est, gt, gt_mb, c_max=20, target_distance=2.0, valid=None):
    """Estimation, approximation and replacement errors against offset ``c``.

    Targets ``p`` are pixels whose distance to the nearest true boundary
    pixel ``b`` rounds to ``target_distance``.  With ``u`` the unit vector
    from ``b`` to ``p`` and ``q = p + c*u``, a pair is used while the whole
    segment from ``p`` to ``q`` is in frame and keeps ``b`` as a nearest
    boundary pixel (checked at half-pixel steps on the rounded pixels).
    """
    est = as_flow(est, "estimate")
    gt = as_flow(gt, "ground truth")
    gt_mb = np.asarray(gt_mb, dtype=bool)
    check_same_grid(("estimate", est), ("ground truth", gt), ("boundary map", gt_mb))
    h, w = gt_mb.shape
    dist, idx = distance_transform(gt_mb, return_indices=True)
    sel = np.abs(dist - target_distance) < 0.5
    if valid is not None:
        sel &= np.asarray(valid, dtype=bool)
    py, px = np.nonzero(sel)
    by, bx = idx[0][py, px], idx[1][py, px]
    ux = (px - bx) / dist[py, px]
    uy = (py - by) / dist[py, px]
    f_p = gt[py, px]

    alive = np.ones(py.size, dtype=bool)
    entries = []
    for c in range(c_max + 1):
        # Extend the validity check over (c - 1, c] at half-pixel steps.
        for s in ((c - 0.5, c) if c > 0 else (0.0,)):
            sx = px + s * ux
            sy = py + s * uy
            inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
            alive &= inside
            rx = np.clip(np.floor(sx + 0.5).astype(int), 0, w - 1)
            ry = np.clip(np.floor(sy + 0.5).astype(int), 0, h - 1)
            d_b = np.hypot(rx - bx, ry - by)
            alive &= d_b <= dist[ry, rx] + 1e-9
        qx = px + c * ux
        qy = py + c * uy
        keep = alive.copy()
        if valid is not None:
            keep &= np.asarray(valid, dtype=bool)[np.clip(np.floor(qy + 0.5).astype(int), 0, h - 1),
                                                  np.clip(np.floor(qx + 0.5).astype(int), 0, w - 1)]
        n = int(np.count_nonzero(keep))
        if n == 0:
            entries.append(DecompositionEntry(c, float("nan"), float("nan"), float("nan"), 0))
            continue
        fh_q = bilinear_sample(est, qx[keep], qy[keep])
        f_q = bilinear_sample(gt, qx[keep], qy[keep])
        fp = f_p[keep]
        e = _norm(fh_q - f_q)
        a = _norm(f_q - fp)
        r = _norm(fp - fh_q)
        entries.append(DecompositionEntry(c, float(np.sum(e) / n), float(np.sum(a) / n),
                                          float(np.sum(r) / n), n))
    return entries


def _norm(v):
    return np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1])


def side_epe_pairs(est, gt, gt_mb, image, sigma=5.0, grad_eps=1e-3, valid=None):
    """EPE on both sides of every true boundary pixel.

    For each boundary pixel ``b`` with a usable brightness normal ``u`` the
    EPE is sampled at ``b + sigma*u`` and ``b - sigma*u``.  Returns an
    ``(N, 4)`` array of rows ``(bx, by, smaller, larger)``.
    """
    est = as_flow(est, "estimate")
    gt = as_flow(gt, "ground truth")
    gt_mb = np.asarray(gt_mb, dtype=bool)
    check_same_grid(("estimate", est), ("ground truth", gt), ("boundary map", gt_mb), ("image", np.asarray(image)))
    grad = brightness_gradient(luminance(image))
    mag = np.hypot(grad[..., 0], grad[..., 1])
    usable = gt_mb & (mag >= grad_eps) & (mag > 0)
    by, bx = np.nonzero(usable)
    ux = grad[by, bx, 0] / mag[by, bx]
    uy = grad[by, bx, 1] / mag[by, bx]
    err = epe_map(est, gt)
    e_a = bilinear_sample(err, bx + sigma * ux, by + sigma * uy)
    e_c = bilinear_sample(err, bx - sigma * ux, by - sigma * uy)
    rows = np.stack([bx, by, np.minimum(e_a, e_c), np.maximum(e_a, e_c)], axis=1).astype(np.float64)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        h, w = valid.shape

        def ok(x, y):
            return valid[np.clip(np.floor(y + 0.5).astype(int), 0, h - 1),
                         np.clip(np.floor(x + 0.5).astype(int), 0, w - 1)]

        rows = rows[ok(bx + sigma * ux, by + sigma * uy) & ok(bx - sigma * ux, by - sigma * uy)]
    return rows


def asymmetry_stats(pairs, subpixel=1.0, large=5.0):
    """Fraction of pairs that are sub-pixel on one side only, and how many of those differ by ``large`` or more."""
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.size == 0:
        return {"n": 0, "one_sided": 0.0, "large_given_one_sided": 0.0}
    small, big = pairs[:, -2], pairs[:, -1]
    one_sided = (small < subpixel) & (big >= subpixel)
    n_one = int(np.count_nonzero(one_sided))
    big_gap = one_sided & (big - small >= large)
    return {
        "n": int(len(pairs)),
        "one_sided": n_one / len(pairs),
        "large_given_one_sided": (np.count_nonzero(big_gap) / n_one) if n_one else 0.0,
    }


def replacement_report(init, refined, gt, replaced, valid=None):
    """AEPE on the replaced pixels before and after refinement."""
    replaced = np.asarray(replaced, dtype=bool)
    sel = replaced if valid is None else replaced & np.asarray(valid, dtype=bool)
    n = int(np.count_nonzero(sel))
    if n == 0:
        return {"n_replaced": 0, "init_aepe": float("nan"), "refined_aepe": float("nan"),
                "reduction_pct": float("nan")}
    before, _ = epe(init, gt, mask=sel)
    after, _ = epe(refined, gt, mask=sel)
    reduction = 100.0 * (before - after) / before if before > 0 else 0.0
    return {"n_replaced": n, "init_aepe": before, "refined_aepe": after, "reduction_pct": reduction}
