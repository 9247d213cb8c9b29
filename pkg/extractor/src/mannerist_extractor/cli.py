"""Command-line entry point: mannerist-extract <video> -o <csv>.

Exit codes mirror the downstream toolkit: 0 success, 2 I/O or undecodable
video, 4 backend unavailable.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .adapter import ExtractionConfig, extract
from .backends import BackendUnavailableError
from .video import VideoError, margin_diffs

log = logging.getLogger("mannerist-extract")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mannerist-extract",
        description="Extract per-frame behavioral features from a video into the canonical CSV.",
    )
    parser.add_argument("video", help="input video path")
    parser.add_argument("-o", "--output", required=True, help="output CSV path")
    parser.add_argument("--backend", default="marker", help="estimation backend (default: marker)")
    parser.add_argument("--stride", type=int, default=1, help="keep every Nth frame (default 1)")
    parser.add_argument(
        "--margin-fraction", type=float, default=0.10,
        help="side-margin width as a fraction of frame width (default 0.10)",
    )
    parser.add_argument(
        "--margins-only", action="store_true",
        help="print per-frame margin differences instead of extracting features",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.margins_only:
            for i, (left, right) in enumerate(margin_diffs(args.video, args.margin_fraction)):
                print(f"{i},{left!r},{right!r}")
            return 0
        config = ExtractionConfig(
            video=args.video,
            output=args.output,
            backend=args.backend,
            frame_stride=args.stride,
            margin_fraction=args.margin_fraction,
        )
        rows = extract(config)
        log.info("%s: %d rows -> %s", args.video, rows, args.output)
        return 0
    except BackendUnavailableError as exc:
        log.error("%s", exc)
        return 4
    except (VideoError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
