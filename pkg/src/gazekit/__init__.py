"""Eye-tracking data analysis: ingest, cleaning, event detection, scanpath
comparison and visualisation."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Blink, DisplayGeometry, EyePolicy, Fixation, GazeSample, Recording, Saccade, Scanpath,
    pixels_to_degrees, visual_angle_to_pixels,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "Blink", "DisplayGeometry", "EyePolicy", "Fixation", "GazeSample", "Recording", "Saccade",
    "Scanpath", "pixels_to_degrees", "visual_angle_to_pixels", "__version__",
]
