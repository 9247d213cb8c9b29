"""Canonical 32-channel behavioral feature streams.

A stream carries, per video frame, 16 facial action-unit intensities, two
head rotations, two mouth distances, and the image coordinates of six
upper-body joints, plus tracking metadata and per-frame margin-difference
statistics used for camera-motion detection.

The channel table is fixed and ordered; every correlation vector and every
trained model embeds a digest of it so that feature-order mismatches fail
loudly instead of silently corrupting results.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateGeometryError, OrderingError, ParseError

AU_NAMES: tuple[str, ...] = (
    "au01", "au02", "au04", "au05", "au06", "au07", "au09", "au10",
    "au12", "au14", "au15", "au17", "au20", "au23", "au25", "au26",
)

# left/right x shoulder/elbow/wrist x x/y, nested in that order
JOINT_NAMES: tuple[str, ...] = ("lsho", "lelb", "lwri", "rsho", "relb", "rwri")

FEATURE_NAMES: tuple[str, ...] = (
    *AU_NAMES,
    "head_rx",
    "head_rz",
    "mouth_h",
    "mouth_v",
    *(f"{j}_{axis}" for j in JOINT_NAMES for axis in ("x", "y")),
)

N_FEATURES = 32
AU_SLICE = slice(0, 16)
HEAD_RX, HEAD_RZ, MOUTH_H, MOUTH_V = 16, 17, 18, 19
JOINT_SLICE = slice(20, 32)
LSHO_X, RSHO_X = 20, 26  # x columns of the two shoulders

CSV_COLUMNS: tuple[str, ...] = (
    "frame", "timestamp", "tracking_ok",
    *FEATURE_NAMES,
    "head_height", "mdiff_l", "mdiff_r",
)


@dataclass(frozen=True)
class FeatureId:
    """One entry of the canonical channel table."""

    index: int
    name: str


FEATURE_IDS: tuple[FeatureId, ...] = tuple(
    FeatureId(i, name) for i, name in enumerate(FEATURE_NAMES)
)

FEATURE_INDEX: dict[str, int] = {name: i for i, name in enumerate(FEATURE_NAMES)}


def feature_order_hash() -> str:
    """Digest of the canonical channel table (index:name pairs)."""
    text = "\n".join(f"{i}:{name}" for i, name in enumerate(FEATURE_NAMES))
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


FEATURE_ORDER_HASH = feature_order_hash()


@dataclass(frozen=True)
class FrameRecord:
    """One frame's measurements, in image coordinates."""

    frame_index: int
    timestamp: float
    tracking_ok: bool
    au: np.ndarray                 # (16,) intensities
    head_rx: float
    head_rz: float
    mouth_h: float
    mouth_v: float
    joints_px: np.ndarray          # (6, 2) image-coordinate pairs
    head_height_px: float
    margin_diff_left: float
    margin_diff_right: float


@dataclass(frozen=True)
class NormalizedFrame:
    """One frame's measurements with joints in action-plane units."""

    frame_index: int
    timestamp: float
    tracking_ok: bool
    au: np.ndarray
    head_rx: float
    head_rz: float
    mouth_h: float
    mouth_v: float
    joints_ap: np.ndarray          # (6, 2) action-plane pairs
    head_height_px: float
    margin_diff_left: float
    margin_diff_right: float


def _readonly(a: np.ndarray, dtype, shape_tail: tuple[int, ...] = ()) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    if out.ndim != 1 + len(shape_tail) or out.shape[1:] != shape_tail:
        raise ValueError(f"expected shape (n, {shape_tail}), got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FrameStream:
    """Column-oriented sequence of frames from one video source.

    ``features`` holds the 32 canonical channels in table order. When
    ``normalized`` is true the joint columns are in action-plane units,
    otherwise in image pixels. Immutable after construction.
    """

    fps: float
    source_id: str
    frame_index: np.ndarray    # (n,) int64, strictly increasing
    timestamp: np.ndarray      # (n,) float64 seconds, strictly increasing
    tracking_ok: np.ndarray    # (n,) bool
    features: np.ndarray       # (n, 32) float64
    head_height: np.ndarray    # (n,) float64 pixels
    margin_diff: np.ndarray    # (n, 2) float64 in [0, 1], (left, right)
    normalized: bool = False

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "frame_index", _readonly(self.frame_index, np.int64))
        object.__setattr__(self, "timestamp", _readonly(self.timestamp, np.float64))
        object.__setattr__(self, "tracking_ok", _readonly(self.tracking_ok, bool))
        object.__setattr__(self, "features", _readonly(self.features, np.float64, (N_FEATURES,)))
        object.__setattr__(self, "head_height", _readonly(self.head_height, np.float64))
        object.__setattr__(self, "margin_diff", _readonly(self.margin_diff, np.float64, (2,)))
        n = len(self.frame_index)
        for name in ("timestamp", "tracking_ok", "features", "head_height", "margin_diff"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")

    def __len__(self) -> int:
        return len(self.frame_index)

    def frame(self, i: int) -> FrameRecord | NormalizedFrame:
        cls = NormalizedFrame if self.normalized else FrameRecord
        joints = self.features[i, JOINT_SLICE].reshape(6, 2)
        return cls(
            frame_index=int(self.frame_index[i]),
            timestamp=float(self.timestamp[i]),
            tracking_ok=bool(self.tracking_ok[i]),
            au=self.features[i, AU_SLICE],
            head_rx=float(self.features[i, HEAD_RX]),
            head_rz=float(self.features[i, HEAD_RZ]),
            mouth_h=float(self.features[i, MOUTH_H]),
            mouth_v=float(self.features[i, MOUTH_V]),
            **{("joints_ap" if self.normalized else "joints_px"): joints},
            head_height_px=float(self.head_height[i]),
            margin_diff_left=float(self.margin_diff[i, 0]),
            margin_diff_right=float(self.margin_diff[i, 1]),
        )

    def __iter__(self) -> Iterator[FrameRecord | NormalizedFrame]:
        return (self.frame(i) for i in range(len(self)))

    @property
    def frames(self) -> tuple:
        return tuple(self)

    def slice(self, start: int, stop: int) -> "FrameStream":
        """Sub-stream over frame positions [start, stop)."""
        return FrameStream(
            fps=self.fps,
            source_id=self.source_id,
            frame_index=self.frame_index[start:stop],
            timestamp=self.timestamp[start:stop],
            tracking_ok=self.tracking_ok[start:stop],
            features=self.features[start:stop],
            head_height=self.head_height[start:stop],
            margin_diff=self.margin_diff[start:stop],
            normalized=self.normalized,
        )


def parse_feature_csv(data: bytes, *, fps: float, source_id: str = "") -> FrameStream:
    """Parse a canonical feature CSV into a stream.

    The header must match the canonical column list exactly. Leading lines
    starting with '#' are provenance comments and are skipped. Raises
    ParseError (with the offending 1-based data row) on malformed rows and
    OrderingError on non-monotone timestamps or frame indices.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}") from exc

    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty file: missing header row")
    reader = csv.reader(lines)
    header = tuple(next(reader))
    if header != CSV_COLUMNS:
        missing = set(CSV_COLUMNS) - set(header)
        unknown = set(header) - set(CSV_COLUMNS)
        raise ParseError(
            "header does not match canonical schema"
            + (f"; missing {sorted(missing)}" if missing else "")
            + (f"; unknown {sorted(unknown)}" if unknown else "")
        )

    n_cols = len(CSV_COLUMNS)
    rows = []
    for rownum, row in enumerate(reader, start=1):
        if len(row) != n_cols:
            raise ParseError(f"expected {n_cols} fields, got {len(row)}", row=rownum)
        try:
            values = [float(v) for v in row]
        except ValueError:
            bad = next(c for c, v in zip(CSV_COLUMNS, row) if not _is_number(v))
            raise ParseError(f"non-numeric value in column {bad!r}", row=rownum) from None
        if values[2] not in (0.0, 1.0):
            raise ParseError(f"tracking_ok must be 0 or 1, got {row[2]!r}", row=rownum)
        rows.append(values)

    arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), n_cols)
    frame_index = arr[:, 0].astype(np.int64)
    timestamp = arr[:, 1]
    if np.any(np.diff(timestamp) <= 0):
        at = int(np.argmax(np.diff(timestamp) <= 0)) + 2
        raise OrderingError(f"timestamps not strictly increasing at data row {at}")
    if np.any(np.diff(frame_index) <= 0):
        at = int(np.argmax(np.diff(frame_index) <= 0)) + 2
        raise OrderingError(f"frame indices not strictly increasing at data row {at}")

    return FrameStream(
        fps=fps,
        source_id=source_id,
        frame_index=frame_index,
        timestamp=timestamp,
        tracking_ok=arr[:, 2] != 0.0,
        features=arr[:, 3:3 + N_FEATURES],
        head_height=arr[:, 3 + N_FEATURES],
        margin_diff=arr[:, 4 + N_FEATURES:6 + N_FEATURES],
    )


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_feature_csv(stream: FrameStream, comments: Sequence[str] = ()) -> bytes:
    """Serialize a stream back to the canonical CSV (inverse of parsing)."""
    if stream.normalized:
        raise ValueError("canonical CSVs carry image-space joints; stream is normalized")
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i in range(len(stream)):
        writer.writerow([
            int(stream.frame_index[i]),
            repr(float(stream.timestamp[i])),
            int(stream.tracking_ok[i]),
            *(repr(float(v)) for v in stream.features[i]),
            repr(float(stream.head_height[i])),
            repr(float(stream.margin_diff[i, 0])),
            repr(float(stream.margin_diff[i, 1])),
        ])
    return buf.getvalue().encode("utf-8")


def normalize_gestures(stream: FrameStream) -> FrameStream:
    """Map joint pixels into the speaker-centric action plane, per frame.

    The plane is a box centered on the chest (midpoint of the shoulders),
    8 head heights wide and 6 tall; its upper-left corner maps to (0, 0)
    and its lower-right to (1, 1). Coordinates are not clamped, so joints
    outside the box land outside [0, 1].

    Untracked frames carry no usable geometry; their joint columns are set
    to NaN and are expected to be filled by clip-level interpolation.
    Tracked frames with a non-positive head height raise
    DegenerateGeometryError.
    """
    if stream.normalized:
        raise ValueError("stream is already normalized")
    tracked = stream.tracking_ok
    hh = stream.head_height
    bad = tracked & ~(hh > 0)
    if np.any(bad):
        at = int(stream.frame_index[np.argmax(bad)])
        raise DegenerateGeometryError(
            f"tracked frame {at} has head_height_px = {hh[np.argmax(bad)]:g} (must be > 0)"
        )

    feats = np.array(stream.features, copy=True)
    joints = feats[:, JOINT_SLICE].reshape(len(stream), 6, 2)
    cx = (feats[:, LSHO_X] + feats[:, RSHO_X]) / 2.0
    cy = (feats[:, LSHO_X + 1] + feats[:, RSHO_X + 1]) / 2.0
    w = 8.0 * hh
    h = 6.0 * hh
    with np.errstate(divide="ignore", invalid="ignore"):
        ap_x = (joints[:, :, 0] - (cx - w / 2.0)[:, None]) / w[:, None]
        ap_y = (joints[:, :, 1] - (cy - h / 2.0)[:, None]) / h[:, None]
    joints_ap = np.stack([ap_x, ap_y], axis=2)
    joints_ap[~tracked] = np.nan
    feats[:, JOINT_SLICE] = joints_ap.reshape(len(stream), 12)

    return FrameStream(
        fps=stream.fps,
        source_id=stream.source_id,
        frame_index=stream.frame_index,
        timestamp=stream.timestamp,
        tracking_ok=stream.tracking_ok,
        features=feats,
        head_height=stream.head_height,
        margin_diff=stream.margin_diff,
        normalized=True,
    )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of stream validation; gaps are informational, violations reject."""

    n_frames: int
    tracked_fraction: float
    gap_indices: tuple[int, ...]
    violations: tuple[str, ...] = field(default=())

    @property
    def accepted(self) -> bool:
        return not self.violations


def validate_stream(stream: FrameStream) -> ValidationReport:
    """Check stream invariants and report, without raising.

    Violations: non-monotone timestamps or frame indices, a tracked frame
    with non-positive head height, negative action-unit intensities on
    tracked frames, margin differences outside [0, 1], and non-finite
    measurements on tracked frames. Timestamp gaps larger than two frame
    periods are reported but do not reject the stream.
    """
    violations: list[str] = []
    n = len(stream)
    tracked_fraction = float(np.mean(stream.tracking_ok)) if n else 0.0

    dt = np.diff(stream.timestamp)
    if np.any(dt <= 0):
        violations.append(f"timestamps not strictly increasing at position {int(np.argmax(dt <= 0)) + 1}")
    if np.any(np.diff(stream.frame_index) <= 0):
        violations.append("frame indices not strictly increasing")

    tracked = stream.tracking_ok
    bad_hh = tracked & ~(stream.head_height > 0)
    if np.any(bad_hh):
        violations.append(
            f"{int(np.sum(bad_hh))} tracked frame(s) with non-positive head height "
            f"(first at position {int(np.argmax(bad_hh))})"
        )
    if np.any(stream.features[tracked, AU_SLICE] < 0):
        violations.append("negative action-unit intensities on tracked frames")
    if np.any((stream.margin_diff < 0) | (stream.margin_diff > 1)):
        violations.append("margin differences outside [0, 1]")
    if not np.all(np.isfinite(stream.features[tracked])):
        violations.append("non-finite measurements on tracked frames")

    gap = np.flatnonzero(dt > 2.0 / stream.fps) + 1
    return ValidationReport(
        n_frames=n,
        tracked_fraction=tracked_fraction,
        gap_indices=tuple(int(i) for i in gap),
        violations=tuple(violations),
    )
