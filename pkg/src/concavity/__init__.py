"""Concave point detection for overlapping objects in binary masks."""

__version__ = "0.1.0"

from .contour import CurvatureProfile, EmptyMask, TinyObject, k_curvature, k_slope, simplify_rdp, trace_contour
from .detector import DetectorParams, Kind, NoRegions, Region, classify_concave, detect, detect_concave_points
from .evaluation import cba, match_points, mcc, med, prf1, sds, theta_sweep
from .geometry import (
    Containment,
    DegenerateConics,
    Ellipse,
    ellipse_contains,
    ellipse_eval,
    ellipse_pair_intersections,
    point_in_polygon,
    rasterize_union,
)
from .synth import GenParams, GenerationExhausted, Scene, generate_dataset, generate_scene, ground_truth_concave_points

__all__ = [
    "CurvatureProfile", "EmptyMask", "TinyObject", "k_curvature", "k_slope", "simplify_rdp", "trace_contour",
    "DetectorParams", "Kind", "NoRegions", "Region", "classify_concave", "detect", "detect_concave_points",
    "cba", "match_points", "mcc", "med", "prf1", "sds", "theta_sweep",
    "Containment", "DegenerateConics", "Ellipse", "ellipse_contains", "ellipse_eval",
    "ellipse_pair_intersections", "point_in_polygon", "rasterize_union",
    "GenParams", "GenerationExhausted", "Scene", "generate_dataset", "generate_scene", "ground_truth_concave_points",
]
