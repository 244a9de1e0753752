"""Slow, obviously-correct reference implementations used as test oracles."""

import math

import numpy as np


def hysteresis_fixpoint(m_md, m_e, m_ism):
    """Grow strong pixels into weak ones by repeated 8-neighbour dilation until stable."""
    strong = np.asarray(m_md, dtype=bool)
    weak = ~strong & np.asarray(m_e, dtype=bool) & np.asarray(m_ism, dtype=bool)
    out = strong.copy()
    while True:
        padded = np.pad(out, 1)
        grown = np.zeros_like(out)
        h, w = out.shape
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                grown |= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        new = out | (grown & weak)
        if np.array_equal(new, out):
            return out
        out = new


def _length(x, y):
    # Plain sqrt of squares: hypot rounds differently and flips exact 0.2 ties.
    return math.sqrt(x * x + y * y)


def safe_distance_scan(profile, tau=0.2, d_max=20, zero=1e-9):
    """Direct scan of the safe-distance rule over an explicit profile [f(1), f(2), ...]."""
    f = [tuple(map(float, v)) for v in profile]
    for d in range(1, min(d_max, len(f) - 1) + 1):
        num = _length(f[d - 1][0] - f[d][0], f[d - 1][1] - f[d][1])
        den = _length(f[0][0] - f[d - 1][0], f[0][1] - f[d - 1][1])
        if den < zero:
            if num < zero:
                return d
            continue
        if num / den < tau:
            return d
    return None


def distance_brute(mask):
    """O(n^2) Euclidean distance to the nearest true pixel (inf if none)."""
    mask = np.asarray(mask, dtype=bool)
    pts = np.argwhere(mask)
    h, w = mask.shape
    out = np.full((h, w), np.inf)
    for r in range(h):
        for c in range(w):
            for pr, pc in pts:
                out[r, c] = min(out[r, c], math.sqrt((r - pr) ** 2 + (c - pc) ** 2))
    return out


def pearson(a, b):
    """Cosine of two already-centred vectors, 0 on a degenerate norm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(a @ b) / (na * nb)
