"""Synthetic three-frame scenes with known flow and boundaries.

A static textured background and an independently textured rectangle that
translates by a fixed displacement per frame.  Texture values are
multiples of 1/255 so frames survive an 8-bit PNG round trip unchanged.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import bilinear_sample, distance_transform

# Texture intensity ranges (8-bit levels) for background and foreground.
BG_LEVELS = (40, 100)
FG_LEVELS = (150, 210)


@dataclass(frozen=True)
class SynthSceneSpec:
    width: int = 128
    height: int = 128
    fg_rect: tuple = (40, 40, 48, 48)  # x0, y0, width, height in frame 2
    displacement: tuple = (8.0, 0.0)
    texture_seed: int = 0
    estimate_blur_sigma: float = 2.0
    corruption_band: int = 3
    channels: int = 3

    def validate(self):
        x0, y0, rw, rh = self.fg_rect
        if self.width < 1 or self.height < 1:
            raise ValueError("frame size must be positive")
        if rw < 1 or rh < 1:
            raise ValueError("foreground rectangle must be non-empty")
        if self.estimate_blur_sigma < 0:
            raise ValueError("estimate_blur_sigma must be >= 0")
        if self.corruption_band < 0:
            raise ValueError("corruption_band must be >= 0")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        dx, dy = self.displacement
        for k, label in ((0, "frame 2"), (1, "frame 3"), (-1, "frame 1")):
            lx, ly = x0 + k * dx, y0 + k * dy
            if lx < 0 or ly < 0 or lx + rw > self.width or ly + rh > self.height:
                raise ValueError(f"foreground rectangle leaves the frame in {label}")


@dataclass
class SynthScene:
    frame1: np.ndarray
    frame2: np.ndarray
    frame3: np.ndarray
    flow_gt: np.ndarray
    boundary_gt: np.ndarray
    flow_est: np.ndarray
    # Backward flow (frame 2 -> frame 1) and its estimate.
    flow_gt_bwd: np.ndarray
    flow_est_bwd: np.ndarray
    fg_mask: np.ndarray


def _render(spec, bg, fg, k):
    """Frame ``k`` (-1, 0, 1 for frames 1, 2, 3)."""
    x0, y0, rw, rh = spec.fg_rect
    dx, dy = spec.displacement
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    sx = xx - k * dx
    sy = yy - k * dy
    inside = (sx >= x0 - 1e-9) & (sx <= x0 + rw - 1 + 1e-9) & (sy >= y0 - 1e-9) & (sy <= y0 + rh - 1 + 1e-9)
    frame = bg.copy()
    frame[inside] = bilinear_sample(fg, sx[inside], sy[inside])
    return frame


def _blur(flow, sigma):
    if sigma <= 0:
        return flow.copy()
    return np.stack([ndimage.gaussian_filter(flow[..., i], sigma, mode="nearest") for i in range(2)], axis=-1)


def synth_scene(spec=SynthSceneSpec()):
    """Build frames, ground truth and a degraded flow estimate from ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.texture_seed)
    shape = (spec.height, spec.width, spec.channels)
    bg = rng.integers(BG_LEVELS[0], BG_LEVELS[1] + 1, size=shape) / 255.0
    fg = rng.integers(FG_LEVELS[0], FG_LEVELS[1] + 1, size=shape) / 255.0

    frames = [_render(spec, bg, fg, k) for k in (-1, 0, 1)]

    x0, y0, rw, rh = spec.fg_rect
    fg_mask = np.zeros((spec.height, spec.width), dtype=bool)
    fg_mask[y0:y0 + rh, x0:x0 + rw] = True
    disp = np.asarray(spec.displacement, dtype=np.float64)
    flow_gt = np.zeros((spec.height, spec.width, 2))
    flow_gt[fg_mask] = disp
    flow_gt_bwd = -flow_gt

    # Foreground pixels with a 4-neighbour in the background.
    padded = np.pad(fg_mask, 1, mode="edge")
    bg_nbr = (~padded[:-2, 1:-1] | ~padded[2:, 1:-1] | ~padded[1:-1, :-2] | ~padded[1:-1, 2:])
    boundary = fg_mask & bg_nbr

    flow_est = _blur(flow_gt, spec.estimate_blur_sigma)
    if spec.corruption_band > 0:
        band = (~fg_mask) & (distance_transform(boundary) <= spec.corruption_band)
        flow_est[band] = disp
    flow_est_bwd = _blur(flow_gt_bwd, spec.estimate_blur_sigma)

    return SynthScene(frames[0], frames[1], frames[2], flow_gt, boundary, flow_est,
                      flow_gt_bwd, flow_est_bwd, fg_mask)
