"""Multi-modal fear-level dataset construction and sequence classification."""

from .core import BinaryFear, FearLevel, FrameClock, SessionManifest, binarize, frame_to_time
from .errors import FearkitError

__version__ = "0.1.0"

__all__ = [
    "BinaryFear",
    "FearLevel",
    "FearkitError",
    "FrameClock",
    "SessionManifest",
    "binarize",
    "frame_to_time",
    "__version__",
]
