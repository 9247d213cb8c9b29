from __future__ import annotations

import math

import cv2
import numpy as np
import pytest

from mannerist_extractor.backends import MARKER_COLORS

WIDTH, HEIGHT, FPS = 640, 480, 30.0

FACE_CENTER = (320, 140)
FACE_AXES = (40, 55)           # head height = 2 * 55 = 110 px
MOUTH_SIZE = (36, 14)
JOINTS = {
    "lsho": (250, 260),
    "lelb": (230, 340),
    "lwri": (240, 410),
    "rsho": (390, 260),
    "relb": (410, 340),
    "rwri": (400, 410),
}


def draw_subject(frame: np.ndarray, t: float, wave: float = 1.0) -> None:
    """Paint the color-coded stick figure; wrists wave over time."""
    cv2.ellipse(frame, FACE_CENTER, FACE_AXES, 0, 0, 360, MARKER_COLORS["face"], -1)
    mx, my = FACE_CENTER[0], FACE_CENTER[1] + 30
    cv2.rectangle(
        frame,
        (mx - MOUTH_SIZE[0] // 2, my - MOUTH_SIZE[1] // 2),
        (mx + MOUTH_SIZE[0] // 2, my + MOUTH_SIZE[1] // 2),
        MARKER_COLORS["mouth"], -1,
    )
    for name, (x, y) in JOINTS.items():
        if name.endswith("wri"):
            y = int(y - wave * 25 * (1 + math.sin(2 * math.pi * 0.5 * t)) / 2)
        cv2.circle(frame, (int(x), int(y)), 10, MARKER_COLORS[name], -1)


def write_video(path, frames) -> None:
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), FPS, (WIDTH, HEIGHT))
    assert writer.isOpened()
    for frame in frames:
        writer.write(frame)
    writer.release()


def background() -> np.ndarray:
    return np.full((HEIGHT, WIDTH, 3), MARKER_COLORS["background"], np.uint8)


@pytest.fixture(scope="session")
def subject_video(tmp_path_factory):
    """10 s of a waving subject; margins stay static."""
    path = tmp_path_factory.mktemp("videos") / "subject.avi"

    def frames():
        for i in range(300):
            frame = background()
            draw_subject(frame, i / FPS)
            yield frame

    write_video(path, frames())
    return path


@pytest.fixture(scope="session")
def static_video(tmp_path_factory):
    """Every frame identical: margin differences must be exactly zero."""
    path = tmp_path_factory.mktemp("videos") / "static.avi"
    frame = background()
    draw_subject(frame, 0.0, wave=0.0)
    write_video(path, (frame.copy() for _ in range(60)))
    return path


@pytest.fixture(scope="session")
def hardcut_video(tmp_path_factory):
    """Dark first half, bright second half: a full-frame cut."""
    path = tmp_path_factory.mktemp("videos") / "hardcut.avi"
    dark = np.full((HEIGHT, WIDTH, 3), 30, np.uint8)
    bright = np.full((HEIGHT, WIDTH, 3), 225, np.uint8)
    frames = [dark.copy() for _ in range(30)] + [bright.copy() for _ in range(30)]
    write_video(path, frames)
    return path


@pytest.fixture(scope="session")
def dropout_video(tmp_path_factory):
    """Subject disappears for frames 40..59."""
    path = tmp_path_factory.mktemp("videos") / "dropout.avi"

    def frames():
        for i in range(120):
            frame = background()
            if not 40 <= i < 60:
                draw_subject(frame, i / FPS)
            yield frame

    write_video(path, frames())
    return path


def decoded_frame_count(path) -> int:
    cap = cv2.VideoCapture(str(path))
    n = 0
    while cap.read()[0]:
        n += 1
    cap.release()
    return n
