"""Frame duplication forensics: coarse-to-fine detection, localization, evaluation."""

__version__ = "0.1.0"

from .config import RunConfig, ScorerSpec
from .embedder import EmbedderSpec, embed_frame, embed_sequence
from .fine import DetectionReport, DuplicationMatch, detect
from .localization import localize
from .media_io import FrameBuffer, VideoClip, read_clip

__all__ = [
    "DetectionReport",
    "DuplicationMatch",
    "EmbedderSpec",
    "FrameBuffer",
    "RunConfig",
    "ScorerSpec",
    "VideoClip",
    "detect",
    "embed_frame",
    "embed_sequence",
    "localize",
    "read_clip",
]
