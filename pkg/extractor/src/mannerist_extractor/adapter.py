"""Video -> canonical feature CSV.

The adapter is a dumb transducer: one row per processed frame, raw image
coordinates, no normalization and no frame filtering. Detection failures
become tracking_ok = 0 rows with zero-filled measurements so the row
count always equals the decoded frame count.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import cv2

from .backends import get_backend
from .schema import CSV_COLUMNS
from .video import margin_diff_pair, open_video, video_fps

ADAPTER_VERSION = "0.1.0"


@dataclass(frozen=True)
class ExtractionConfig:
    video: str
    output: str
    backend: str = "marker"
    frame_stride: int = 1
    margin_fraction: float = 0.10
    extra_comments: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not 0 < self.margin_fraction < 0.5:
            raise ValueError(
                f"margin_fraction must be in (0, 0.5), got {self.margin_fraction}"
            )
        if self.frame_stride < 1:
            raise ValueError(f"frame_stride must be >= 1, got {self.frame_stride}")


def _format_row(values) -> str:
    return ",".join(
        str(v) if isinstance(v, int) else repr(float(v)) for v in values
    )


def extract(config: ExtractionConfig) -> int:
    """Run extraction and write the CSV; returns the number of data rows.

    With frame_stride > 1 only every stride-th decoded frame is kept and
    rows are re-indexed contiguously, i.e. the output is a stream at
    fps / stride. Margin differences always compare adjacent kept frames.
    """
    backend = get_backend(config.backend)
    cap = open_video(config.video)
    fps = video_fps(cap)
    effective_fps = fps / config.frame_stride

    buf = io.StringIO()
    rows = 0
    prev_gray = None
    decoded = 0
    try:
        while True:
            ok, frame = cap.read()
            if not ok:
                break
            keep = decoded % config.frame_stride == 0
            decoded += 1
            if not keep:
                continue
            gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
            mdl, mdr = margin_diff_pair(prev_gray, gray, config.margin_fraction)
            prev_gray = gray

            est = backend.estimate(frame)
            timestamp = rows / effective_fps
            if est is None:
                values = [rows, timestamp, 0] + [0.0] * 33 + [mdl, mdr]
            else:
                values = [
                    rows, timestamp, 1,
                    *est.au,
                    est.head_rx, est.head_rz, est.mouth_h, est.mouth_v,
                    *est.joints_px.reshape(12),
                    est.head_height_px, mdl, mdr,
                ]
            buf.write(_format_row(values) + "\n")
            rows += 1
    finally:
        cap.release()

    out = Path(config.output)
    header = io.StringIO()
    header.write(f"# extractor=mannerist-extract/{ADAPTER_VERSION}\n")
    header.write(f"# backend={backend.name}/{backend.version}\n")
    header.write(
        f"# video={Path(config.video).name} fps={fps:g} stride={config.frame_stride} "
        f"effective_fps={effective_fps:g} margin_fraction={config.margin_fraction:g}\n"
    )
    for comment in config.extra_comments:
        header.write(f"# {comment}\n")
    header.write(",".join(CSV_COLUMNS) + "\n")
    out.write_text(header.getvalue() + buf.getvalue(), encoding="utf-8")
    return rows
