"""Motion boundary detection and flow refinement near motion boundaries."""

__version__ = "0.1.0"

from .config import PipelineParams, resolve_params
from .detect import Detection, detect_motion_boundaries, detect_with_params, hysteresis_combine
from .evaluation import boundary_f1, epe, epe_vs_distance, error_decomposition, side_epe_pairs
from .maps import IsmParams, edge_map, ism_map, motion_discrepancy_map
from .refine import RefineParams, refine_flow, replacement_set, safe_distance
from .synth import SynthSceneSpec, synth_scene

__all__ = [
    "Detection", "IsmParams", "PipelineParams", "RefineParams", "SynthSceneSpec",
    "boundary_f1", "detect_motion_boundaries", "detect_with_params", "edge_map", "epe",
    "epe_vs_distance", "error_decomposition", "hysteresis_combine", "ism_map",
    "motion_discrepancy_map", "refine_flow", "replacement_set", "resolve_params",
    "safe_distance", "side_epe_pairs", "synth_scene",
]
