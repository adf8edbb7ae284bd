"""Vision front end: corners, optical flow, occlusion handling and redetection."""

from .features import FeatureSet, detect_features, min_eigenvalue_map
from .flow import FlowParams, FlowResult, build_pyramid, pyramidal_flow
from .matching import extract_patch, match_template, ncc_map
from .occlusion import (OcclusionState, TransitionCase, adjust_centroid, classify_occlusion,
                        classify_transition, compute_centroid, reconstruct_missing)
from .pipeline import (StepInfo, TemplateBank, TrackerConfig, TrackerState, build_bank,
                       init_tracker, redetect, track_step)

__all__ = [
    "FeatureSet", "detect_features", "min_eigenvalue_map",
    "FlowParams", "FlowResult", "build_pyramid", "pyramidal_flow",
    "extract_patch", "match_template", "ncc_map",
    "OcclusionState", "TransitionCase", "adjust_centroid", "classify_occlusion",
    "classify_transition", "compute_centroid", "reconstruct_missing",
    "StepInfo", "TemplateBank", "TrackerConfig", "TrackerState", "build_bank",
    "init_tracker", "redetect", "track_step",
]
