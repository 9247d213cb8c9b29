"""Video decoding and margin-difference statistics."""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import cv2
import numpy as np


class VideoError(RuntimeError):
    """The input video is missing or cannot be decoded."""


def open_video(path: str | Path) -> cv2.VideoCapture:
    path = Path(path)
    if not path.exists():
        raise VideoError(f"video not found: {path}")
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise VideoError(f"cannot decode video: {path}")
    return cap


def video_fps(cap: cv2.VideoCapture, fallback: float = 30.0) -> float:
    fps = float(cap.get(cv2.CAP_PROP_FPS))
    return fps if fps > 0 else fallback


def iter_frames(cap: cv2.VideoCapture) -> Iterator[np.ndarray]:
    """Yield decoded BGR frames until the stream ends."""
    while True:
        ok, frame = cap.read()
        if not ok:
            return
        yield frame


def margin_strips(gray: np.ndarray, margin_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    width = gray.shape[1]
    m = max(1, int(round(width * margin_fraction)))
    return gray[:, :m], gray[:, width - m:]


def margin_diff_pair(
    prev_gray: np.ndarray | None,
    gray: np.ndarray,
    margin_fraction: float,
) -> tuple[float, float]:
    """Mean absolute inter-frame difference on the side margins, in [0, 1].

    The first frame of a stream (no predecessor) reports (0, 0).
    """
    if prev_gray is None:
        return 0.0, 0.0
    left_a, right_a = margin_strips(prev_gray, margin_fraction)
    left_b, right_b = margin_strips(gray, margin_fraction)
    dl = float(np.mean(np.abs(left_b.astype(np.int16) - left_a.astype(np.int16)))) / 255.0
    dr = float(np.mean(np.abs(right_b.astype(np.int16) - right_a.astype(np.int16)))) / 255.0
    return dl, dr


def margin_diffs(path: str | Path, margin_fraction: float = 0.10) -> list[tuple[float, float]]:
    """Per-frame (left, right) margin differences for a whole video."""
    if not 0 < margin_fraction < 0.5:
        raise ValueError(f"margin_fraction must be in (0, 0.5), got {margin_fraction}")
    cap = open_video(path)
    out: list[tuple[float, float]] = []
    prev = None
    try:
        for frame in iter_frames(cap):
            gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
            out.append(margin_diff_pair(prev, gray, margin_fraction))
            prev = gray
    finally:
        cap.release()
    return out
