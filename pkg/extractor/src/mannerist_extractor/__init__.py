"""Video-to-feature-CSV adapter for the mannerist toolkit."""

from .adapter import ADAPTER_VERSION, ExtractionConfig, extract
from .backends import BackendUnavailableError, FrameEstimate, MarkerBackend, get_backend
from .schema import CSV_COLUMNS
from .video import VideoError, margin_diffs

__version__ = ADAPTER_VERSION

__all__ = [
    "ADAPTER_VERSION",
    "BackendUnavailableError",
    "CSV_COLUMNS",
    "ExtractionConfig",
    "FrameEstimate",
    "MarkerBackend",
    "VideoError",
    "extract",
    "get_backend",
    "margin_diffs",
]
