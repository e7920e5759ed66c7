"""Markerless monocular 3D position tracking from edge-image ray casting."""

from raytrack.config import Config, EstimatorConfig, PipelineConfig, TrackerConfig
from raytrack.pixels import DiffImage, EdgeImage, Frame, GrayImage, preprocess
from raytrack.raycast import (
    ProjectionEstimate,
    estimate_iter_nray,
    estimate_iter_nyray,
    estimate_iter_nyray_raster,
    estimate_nray,
)
from raytrack.tracker import Coord3D, Mode, Tracker, TrackerState, step

__version__ = "0.1.0"

__all__ = [
    "Config",
    "Coord3D",
    "DiffImage",
    "EdgeImage",
    "EstimatorConfig",
    "Frame",
    "GrayImage",
    "Mode",
    "PipelineConfig",
    "ProjectionEstimate",
    "Tracker",
    "TrackerConfig",
    "TrackerState",
    "estimate_iter_nray",
    "estimate_iter_nyray",
    "estimate_iter_nyray_raster",
    "estimate_nray",
    "preprocess",
    "step",
]
