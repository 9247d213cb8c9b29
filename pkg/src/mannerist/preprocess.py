"""Camera-motion excision and clip segmentation.

Footage is reduced to stable spans by thresholding per-frame margin
differences, then cut into overlapping fixed-duration clips, the unit on
which correlation features are computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .features import FrameStream

DEFAULT_WINDOW_S = 10.0
DEFAULT_STRIDE_S = 5.0
DEFAULT_MOTION_THRESHOLD = 0.05
MIN_TRACKED_FRACTION = 0.9


@dataclass(frozen=True)
class MotionMask:
    """Per-frame camera-motion flags (true = motion detected)."""

    flags: np.ndarray  # (n,) bool

    def __post_init__(self):
        flags = np.array(self.flags, dtype=bool, copy=True)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    def __len__(self) -> int:
        return len(self.flags)


@dataclass(frozen=True)
class Segment:
    """Maximal motion-free run of consecutive frames."""

    source_id: str
    frames: FrameStream

    def __post_init__(self):
        idx = self.frames.frame_index
        if len(idx) and np.any(np.diff(idx) != 1):
            raise ValueError("segment frame indices must be contiguous")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Clip:
    """Fixed-duration window of frames, interpolated and ready to featurize."""

    source_id: str
    start_time: float
    fps: float
    features: np.ndarray       # (n_frames, 32), untracked rows filled in
    tracked_fraction: float
    normalized: bool

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    @property
    def n_frames(self) -> int:
        return len(self.features)


def frames_per_window(window_s: float, fps: float) -> int:
    """Frame count of a full window at the given rate."""
    n = int(round(window_s * fps))
    if n < 2:
        raise ValueError(f"window of {window_s} s at {fps} fps spans {n} frame(s); need >= 2")
    return n


def detect_camera_motion(stream: FrameStream, threshold: float = DEFAULT_MOTION_THRESHOLD) -> MotionMask:
    """Flag frames whose left or right margin difference exceeds the threshold.

    The comparison is strict, and the first frame of a stream is never
    flagged (its margin differences are zero by definition).
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    flags = np.max(stream.margin_diff, axis=1) > threshold
    if len(flags):
        flags[0] = False
    return MotionMask(flags=flags)


def excise_and_split(
    stream: FrameStream,
    mask: MotionMask,
    *,
    window_s: float = DEFAULT_WINDOW_S,
) -> list[Segment]:
    """Drop flagged frames and split the stream at them into motion-free runs.

    Runs too short to hold a single full window are discarded.
    """
    if len(mask) != len(stream):
        raise ValueError(f"mask length {len(mask)} does not match stream length {len(stream)}")
    min_frames = frames_per_window(window_s, stream.fps)

    segments: list[Segment] = []
    flags = mask.flags
    boundaries = np.flatnonzero(flags)
    starts = np.concatenate(([0], boundaries + 1))
    stops = np.concatenate((boundaries, [len(stream)]))
    for a, b in zip(starts, stops):
        if b - a >= min_frames:
            segments.append(Segment(source_id=stream.source_id, frames=stream.slice(int(a), int(b))))
    return segments


def interpolate_missing(features: np.ndarray, tracked: np.ndarray) -> np.ndarray:
    """Fill untracked rows by linear interpolation between tracked neighbors.

    Rows before the first (after the last) tracked frame take its value.
    Requires at least one tracked row.
    """
    if np.all(tracked):
        return features
    if not np.any(tracked):
        raise InsufficientDataError("cannot interpolate a clip with no tracked frames")
    out = np.array(features, copy=True)
    pos = np.arange(len(features), dtype=np.float64)
    good = np.flatnonzero(tracked)
    missing = np.flatnonzero(~tracked)
    for c in range(features.shape[1]):
        out[missing, c] = np.interp(pos[missing], pos[good], features[good, c])
    return out


def segment_clips(
    segment: Segment,
    *,
    window_s: float = DEFAULT_WINDOW_S,
    stride_s: float = DEFAULT_STRIDE_S,
    min_tracked_fraction: float = MIN_TRACKED_FRACTION,
) -> list[Clip]:
    """Cut a segment into overlapping full-window clips.

    Clip k covers frame positions [k*stride, k*stride + window); only full
    windows are emitted, so a segment shorter than the window yields an
    empty list. Clips with too few tracked frames are dropped; untracked
    frames inside retained clips are filled by linear interpolation before
    the clip is returned.
    """
    if not window_s > 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    if not 0 < stride_s <= window_s:
        raise ValueError(f"stride_s must be in (0, window_s], got {stride_s}")
    stream = segment.frames
    win = frames_per_window(window_s, stream.fps)
    stride = max(1, int(round(stride_s * stream.fps)))

    clips: list[Clip] = []
    n = len(stream)
    for start in range(0, n - win + 1, stride):
        stop = start + win
        tracked = stream.tracking_ok[start:stop]
        frac = float(np.mean(tracked))
        if frac < min_tracked_fraction:
            continue
        feats = interpolate_missing(stream.features[start:stop], tracked)
        clips.append(Clip(
            source_id=segment.source_id,
            start_time=float(stream.timestamp[start]),
            fps=stream.fps,
            features=feats,
            tracked_fraction=frac,
            normalized=stream.normalized,
        ))
    return clips
