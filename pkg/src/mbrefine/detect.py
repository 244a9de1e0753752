"""Hysteresis combination of the evidence maps into motion boundaries."""

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .core import as_flow, as_image, check_same_grid, grow_from_seeds
from .maps import IsmParams, edge_map, ism_map, motion_discrepancy_map

log = logging.getLogger(__name__)


class Label(enum.IntEnum):
    NONE = 0
    WEAK = 1
    STRONG = 2


def hysteresis_labels(m_md, m_e, m_ism):
    """Per-pixel Strong / Weak / None labels as an int8 array of ``Label`` values."""
    m_md, m_e, m_ism = _check_maps(m_md, m_e, m_ism)
    labels = np.full(m_md.shape, Label.NONE, dtype=np.int8)
    labels[~m_md & m_e & m_ism] = Label.WEAK
    labels[m_md] = Label.STRONG
    return labels


def hysteresis_combine(m_md, m_e, m_ism):
    """Strong pixels plus weak pixels 8-connected to a strong one through weak pixels."""
    m_md, m_e, m_ism = _check_maps(m_md, m_e, m_ism)
    return grow_from_seeds(m_md, m_e & m_ism)


def _check_maps(m_md, m_e, m_ism):
    m_md = np.asarray(m_md, dtype=bool)
    m_e = np.asarray(m_e, dtype=bool)
    m_ism = np.asarray(m_ism, dtype=bool)
    check_same_grid(("m_md", m_md), ("m_e", m_e), ("m_ism", m_ism))
    return m_md, m_e, m_ism


@dataclass
class Detection:
    boundaries: np.ndarray
    m_e: np.ndarray
    m_md: np.ndarray
    m_ism: np.ndarray


def detect_with_params(frame2, frame3, flow23, params, *, frame1=None, flow21=None,
                       external_edges=None, jobs=1):
    """``detect_motion_boundaries`` configured from a ``PipelineParams``."""
    return detect_motion_boundaries(
        frame2, frame3, flow23, frame1=frame1, flow21=flow21, theta_md=params.theta_md,
        ism=params.ism_params(), edge_low=params.edge_low, edge_high=params.edge_high,
        edge_smoothing=params.edge_smoothing, edge_tie_tol=params.edge_tie_tol,
        external_edges=external_edges, jobs=jobs)


def detect_motion_boundaries(frame2, frame3, flow23, *, frame1=None, flow21=None,
                             theta_md=1.0, ism=IsmParams(), edge_low=0.04, edge_high=0.08,
                             edge_smoothing=1.0, edge_tie_tol=0.05, external_edges=None, jobs=1):
    """Run the full detector on one frame triple.

    The invalid-smooth-motion map is evaluated on edge pixels and on
    motion-discrepancy pixels (the latter only for diagnostics; the
    hysteresis rule never consults it there).
    """
    frame2 = as_image(frame2, "frame2")
    flow23 = as_flow(flow23, "flow23")
    check_same_grid(("frame2", frame2), ("flow23", flow23))
    if (frame1 is None) != (flow21 is None):
        log.warning("backward term needs both frame1 and flow21; using forward costs only")
        frame1 = flow21 = None
    m_e = edge_map(frame2, edge_low, edge_high, edge_smoothing, external=external_edges,
                   tie_tol=edge_tie_tol)
    m_md = motion_discrepancy_map(flow23, theta_md)
    m_ism = ism_map(frame1, frame2, frame3, flow21, flow23, m_e | m_md, ism, jobs=jobs)
    return Detection(hysteresis_combine(m_md, m_e, m_ism), m_e, m_md, m_ism)
