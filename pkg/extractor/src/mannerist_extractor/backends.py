"""Per-frame estimation backends.

A backend turns one decoded BGR frame into the behavioral measurements of
the canonical schema (or None when no subject is detectable). Heavy
pretrained estimators plug in behind the same interface; the built-in
"marker" backend tracks color-coded synthetic subjects and is what the
test suite drives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class BackendUnavailableError(RuntimeError):
    """The requested estimation backend cannot run in this environment."""


@dataclass(frozen=True)
class FrameEstimate:
    """Measurements for one tracked frame, in image coordinates."""

    au: np.ndarray          # (16,) intensities >= 0
    head_rx: float
    head_rz: float
    mouth_h: float
    mouth_v: float
    joints_px: np.ndarray   # (6, 2): lsho, lelb, lwri, rsho, relb, rwri
    head_height_px: float


# anchor colors (BGR) used by the marker backend; shapes never touch each
# other, so lossy-codec bleed only mixes a shape with the background
MARKER_COLORS: dict[str, tuple[int, int, int]] = {
    "background": (40, 40, 40),
    "face": (0, 0, 230),
    "mouth": (230, 0, 230),
    "lsho": (230, 0, 0),
    "lelb": (0, 230, 0),
    "lwri": (0, 230, 230),
    "rsho": (230, 230, 0),
    "relb": (255, 128, 0),
    "rwri": (128, 0, 255),
}

_JOINT_ORDER = ("lsho", "lelb", "lwri", "rsho", "relb", "rwri")
_MIN_PIXELS = 6
# codec-bleed pixels sit between a shape color and the background; cap the
# distance to the matched anchor so they are assigned to nothing
_MAX_ANCHOR_DIST = 80.0


class MarkerBackend:
    """Tracks a color-coded stick figure by nearest-anchor segmentation.

    Face and mouth extents come from bounding boxes, joints from mask
    centroids. Head pitch is approximated by the mouth's vertical offset
    within the face, roll by the shoulder-line tilt. Action units are not
    estimated and read zero.
    """

    name = "marker"
    version = "1"

    def __init__(self):
        self._names = [n for n in MARKER_COLORS if n != "background"]
        self._anchors = np.array([MARKER_COLORS[n] for n in self._names], dtype=np.float32)
        self._bg = np.array(MARKER_COLORS["background"], dtype=np.float32)

    def _segment(self, frame: np.ndarray) -> dict[str, np.ndarray]:
        # every shape anchor is far from the background color, so pixels
        # near the background cannot pass the shape gate; drop them first
        diff_bg = frame.astype(np.float32) - self._bg
        fg = np.einsum("ijk,ijk->ij", diff_bg, diff_bg) > _MAX_ANCHOR_DIST**2
        ys, xs = np.nonzero(fg)
        masks = {name: np.zeros(frame.shape[:2], dtype=bool) for name in self._names}
        if len(ys) == 0:
            return masks
        pixels = frame[ys, xs].astype(np.float32)
        d2 = (
            np.einsum("ij,ij->i", pixels, pixels)[:, None]
            + np.einsum("ij,ij->i", self._anchors, self._anchors)[None, :]
            - 2.0 * pixels @ self._anchors.T
        )
        labels = np.argmin(d2, axis=1)
        close = d2[np.arange(len(labels)), labels] <= _MAX_ANCHOR_DIST**2
        for k, name in enumerate(self._names):
            sel = (labels == k) & close
            masks[name][ys[sel], xs[sel]] = True
        return masks

    @staticmethod
    def _bbox(mask: np.ndarray) -> tuple[float, float, float, float] | None:
        ys, xs = np.nonzero(mask)
        if len(xs) < _MIN_PIXELS:
            return None
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    @staticmethod
    def _centroid(mask: np.ndarray) -> tuple[float, float] | None:
        ys, xs = np.nonzero(mask)
        if len(xs) < _MIN_PIXELS:
            return None
        return float(xs.mean()), float(ys.mean())

    def estimate(self, frame: np.ndarray) -> FrameEstimate | None:
        masks = self._segment(frame)
        face = self._bbox(masks["face"])
        mouth = self._bbox(masks["mouth"])
        if face is None or mouth is None:
            return None
        joints = []
        for name in _JOINT_ORDER:
            c = self._centroid(masks[name])
            if c is None:
                return None
            joints.append(c)
        joints_px = np.asarray(joints, dtype=np.float64)

        head_height = face[3] - face[1]
        if head_height <= 0:
            return None
        face_cy = (face[1] + face[3]) / 2.0
        mouth_cy = (mouth[1] + mouth[3]) / 2.0
        lsho, rsho = joints_px[0], joints_px[3]
        return FrameEstimate(
            au=np.zeros(16),
            head_rx=(mouth_cy - face_cy) / head_height,
            head_rz=math.atan2(rsho[1] - lsho[1], rsho[0] - lsho[0]),
            mouth_h=mouth[2] - mouth[0],
            mouth_v=mouth[3] - mouth[1],
            joints_px=joints_px,
            head_height_px=head_height,
        )


class MediaPipeBackend:
    """Upper-body and face estimation via MediaPipe, when installed.

    Joints come from the pose landmarker, head height and mouth extents
    from the face mesh. MediaPipe has no action-unit head, so AU columns
    read zero; swap in an AU-capable backend for facial-mannerism work.
    """

    name = "mediapipe"
    version = "solutions-v1"

    # BlazePose landmark ids: shoulders 11/12, elbows 13/14, wrists 15/16
    _POSE_IDS = (11, 13, 15, 12, 14, 16)

    def __init__(self):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise BackendUnavailableError(
                "mediapipe is not installed; use the 'marker' backend or "
                "pip install mediapipe"
            ) from exc
        self._pose = mp.solutions.pose.Pose(static_image_mode=False)
        self._mesh = mp.solutions.face_mesh.FaceMesh(static_image_mode=False)

    def estimate(self, frame: np.ndarray) -> FrameEstimate | None:
        import cv2

        h, w = frame.shape[:2]
        rgb = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
        pose = self._pose.process(rgb)
        mesh = self._mesh.process(rgb)
        if not pose.pose_landmarks or not mesh.multi_face_landmarks:
            return None
        lm = pose.pose_landmarks.landmark
        joints_px = np.array(
            [[lm[i].x * w, lm[i].y * h] for i in self._POSE_IDS], dtype=np.float64
        )
        face = mesh.multi_face_landmarks[0].landmark
        ys = np.array([p.y for p in face]) * h
        head_height = float(ys.max() - ys.min())
        if head_height <= 0:
            return None
        # face-mesh ids: mouth corners 61/291, lips 13 (upper) / 14 (lower)
        mouth_h = abs(face[291].x - face[61].x) * w
        mouth_v = abs(face[14].y - face[13].y) * h
        lsho, rsho = joints_px[0], joints_px[3]
        nose_y = face[1].y * h
        return FrameEstimate(
            au=np.zeros(16),
            head_rx=(nose_y - float(ys.mean())) / head_height,
            head_rz=math.atan2(rsho[1] - lsho[1], rsho[0] - lsho[0]),
            mouth_h=float(mouth_h),
            mouth_v=float(mouth_v),
            joints_px=joints_px,
            head_height_px=head_height,
        )


_BACKENDS = {
    MarkerBackend.name: MarkerBackend,
    MediaPipeBackend.name: MediaPipeBackend,
}


def get_backend(name: str):
    """Instantiate a backend by identifier; unavailable ones raise."""
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise BackendUnavailableError(
            f"unknown backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
    return factory()
