"""Offline figure generation for magnetic-field SLAM runs and reports."""

from .figures import (
    FigureJob,
    render_calib_curves,
    render_error_curves,
    render_map_trajectory,
)
from .io import ArtifactError

__all__ = [
    "ArtifactError",
    "FigureJob",
    "render_calib_curves",
    "render_error_curves",
    "render_map_trajectory",
]
