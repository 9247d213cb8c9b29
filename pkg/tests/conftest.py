from __future__ import annotations

import numpy as np
import pytest

from mannerist import (
    FEATURE_ORDER_HASH,
    FrameStream,
    clip_features,
    detect_camera_motion,
    excise_and_split,
    normalize_gestures,
    segment_clips,
)
from mannerist.evaluation import LabeledClipSet
from mannerist.synthetic import make_persona_pair, sample_stream

PERSONA_SEED = 20260810


def make_stream(
    features: np.ndarray,
    fps: float = 30.0,
    tracking_ok: np.ndarray | None = None,
    head_height: np.ndarray | None = None,
    margin_diff: np.ndarray | None = None,
    source_id: str = "test",
    timestamps: np.ndarray | None = None,
) -> FrameStream:
    """Build a stream straight from a feature matrix, defaults all-tracked."""
    n = len(features)
    return FrameStream(
        fps=fps,
        source_id=source_id,
        frame_index=np.arange(n),
        timestamp=np.arange(n) / fps if timestamps is None else timestamps,
        tracking_ok=np.ones(n, bool) if tracking_ok is None else tracking_ok,
        features=features,
        head_height=np.full(n, 100.0) if head_height is None else head_height,
        margin_diff=np.zeros((n, 2)) if margin_diff is None else margin_diff,
    )


def featurize_stream(stream: FrameStream) -> np.ndarray:
    """Full normalize -> excise -> segment -> featurize path, defaults."""
    norm = normalize_gestures(stream)
    segments = excise_and_split(norm, detect_camera_motion(norm))
    clips = [c for seg in segments for c in segment_clips(seg)]
    return np.array([clip_features(c).values for c in clips])


@pytest.fixture(scope="session")
def persona_pair():
    return make_persona_pair(3.0, seed=PERSONA_SEED)


@pytest.fixture(scope="session")
def persona_clip_sets(persona_pair):
    """30 minutes of footage per persona, featurized once for the whole session."""
    spec_a, spec_b = persona_pair
    real = featurize_stream(sample_stream(spec_a, 1800.0, 30.0, source_id="real"))
    decoy = featurize_stream(sample_stream(spec_b, 1800.0, 30.0, source_id="impostor"))
    return (
        LabeledClipSet("real", real, "target", FEATURE_ORDER_HASH),
        LabeledClipSet("impostor", decoy, "non-target", FEATURE_ORDER_HASH),
    )
