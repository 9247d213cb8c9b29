"""Command-line surface for forensic batch use.

Subcommands: synth, featurize, train, classify, evaluate, sweep,
importance. Parameter precedence is flags > config file > defaults; the
config file is flat ``key = value`` text. Logs go to standard error, data
to files or standard output.

Exit codes: 0 success, 2 I/O or malformed data, 3 insufficient data,
4 incompatible artifacts, 5 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import correlation, evaluation, ocsvm, preprocess, synthetic
from .errors import (
    ConvergenceError,
    IncompatibilityError,
    InsufficientDataError,
    MannersError,
    OrderingError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .features import normalize_gestures, parse_feature_csv, validate_stream, write_feature_csv

log = logging.getLogger("mannerist")

EXIT_OK = 0
EXIT_IO = 2
EXIT_INSUFFICIENT = 3
EXIT_INCOMPATIBLE = 4
EXIT_SOLVER = 5


def load_config(path: str | Path) -> dict[str, str]:
    """Flat key = value config file; '#' starts a comment."""
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


class Settings:
    """Resolves each parameter as flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.cfg = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str, default, cast=float):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.cfg:
            return cast(self.cfg[key])
        return default

    def seed(self) -> int:
        """Explicit seed, or a fresh one that is logged and reported."""
        s = self.get("seed", None, int)
        if s is None:
            s = secrets.randbelow(2**31)
            log.info("no --seed given; using seed %d (recorded in the report)", s)
        return int(s)


def _read_vector_files(paths: Sequence[str]) -> correlation.VectorSet:
    """Load and concatenate feature-vector files, insisting on one feature order."""
    sets = [correlation.read_vector_csv(Path(p).read_bytes()) for p in paths]
    hashes = {s.feature_order_hash for s in sets}
    if len(hashes) > 1:
        raise IncompatibilityError(f"vector files carry conflicting feature orders: {sorted(hashes)}")
    return correlation.VectorSet(
        feature_order_hash=hashes.pop(),
        source_ids=tuple(sid for s in sets for sid in s.source_ids),
        start_times=np.concatenate([s.start_times for s in sets]) if sets else np.zeros(0),
        matrix=np.vstack([s.matrix for s in sets]) if sets else np.zeros((0, correlation.N_PAIRS)),
    )


def _grid_from(settings: Settings) -> ocsvm.HyperGrid:
    gammas = settings.get("gammas", None, str)
    nus = settings.get("nus", None, str)
    base = ocsvm.default_grid()
    return ocsvm.HyperGrid(
        gammas=tuple(float(v) for v in str(gammas).split(",")) if gammas else base.gammas,
        nus=tuple(float(v) for v in str(nus).split(",")) if nus else base.nus,
    )


def _family_target(settings: Settings, family: str) -> float:
    default = evaluation.COMBINED_TARGET if family == "combined" else evaluation.SINGLE_FAMILY_TARGET
    return float(settings.get("target", default))


def cmd_synth(args: argparse.Namespace) -> int:
    settings = Settings(args)
    seed = settings.seed()
    separation = float(settings.get("separation", 3.0))
    duration = float(settings.get("duration", 600.0))
    fps = float(settings.get("fps", 30.0))
    ar = float(settings.get("ar_coeff", synthetic.PAIR_AR_COEFF))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    spec_a, spec_b = synthetic.make_persona_pair(separation, seed, ar_coeff=ar)
    for label, spec in ((args.label_a, spec_a), (args.label_b, spec_b)):
        stream = synthetic.sample_stream(spec, duration, fps, source_id=label)
        (out_dir / f"{label}.csv").write_bytes(write_feature_csv(stream))
        (out_dir / f"{label}.persona.json").write_text(synthetic.persona_to_json(spec, label))
        log.info("wrote %s: %.0f s at %g fps", out_dir / f"{label}.csv", duration, fps)
    print(json.dumps({"seed": seed, "separation": separation, "duration_s": duration,
                      "fps": fps, "labels": [args.label_a, args.label_b]}))
    return EXIT_OK


def cmd_featurize(args: argparse.Namespace) -> int:
    settings = Settings(args)
    fps = settings.get("fps", None)
    if fps is None:
        raise ParseError("featurize requires --fps (or fps in the config file)")
    window = float(settings.get("window", preprocess.DEFAULT_WINDOW_S))
    stride = float(settings.get("stride", preprocess.DEFAULT_STRIDE_S))
    threshold = float(settings.get("motion_threshold", preprocess.DEFAULT_MOTION_THRESHOLD))

    written: list[Path] = []
    try:
        for path in args.inputs:
            src = Path(path)
            stream = parse_feature_csv(src.read_bytes(), fps=float(fps), source_id=src.stem)
            report = validate_stream(stream)
            if not report.accepted:
                raise ValidationError(f"{src}: " + "; ".join(report.violations))
            for gap in report.gap_indices:
                log.warning("%s: timestamp gap at frame position %d", src, gap)

            normalized = normalize_gestures(stream)
            mask = preprocess.detect_camera_motion(normalized, threshold)
            segments = preprocess.excise_and_split(normalized, mask, window_s=window)
            clips = [
                c
                for seg in segments
                for c in preprocess.segment_clips(seg, window_s=window, stride_s=stride)
            ]
            vectors = [correlation.clip_features(c) for c in clips]
            out = Path(args.out_dir or src.parent) / f"{src.stem}.vectors.csv"
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_bytes(correlation.write_vector_csv(
                vectors,
                [c.source_id for c in clips],
                [c.start_time for c in clips],
            ))
            written.append(out)
            if not clips:
                log.warning("%s: no clips survived excision/segmentation", src)
            print(f"{src}: {len(clips)} clips -> {out}")
    except Exception:
        for out in written:
            out.unlink(missing_ok=True)
        raise
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    settings = Settings(args)
    real = _read_vector_files(args.real)
    if len(real) < 5:
        raise InsufficientDataError(f"training needs at least 5 clips, got {len(real)}")
    decoy = _read_vector_files(args.decoy) if args.decoy else None
    if decoy is not None and decoy.feature_order_hash != real.feature_order_hash:
        raise IncompatibilityError("real and decoy files disagree on feature order")

    family = args.family
    target = _family_target(settings, family)
    grid = _grid_from(settings)
    dims = correlation.family_dims(family)
    if decoy is not None:
        log.info("decoys supplied: grid objective is balanced accuracy")
    trained_at = args.trained_at or datetime.now(timezone.utc).strftime("%Y-%m-%d")

    gamma, nu, model = ocsvm.grid_search(
        real.matrix,
        decoy.matrix if decoy is not None else None,
        grid,
        target,
        jobs=int(settings.get("jobs", 1, int)),
        dims=dims,
        feature_order_hash=real.feature_order_hash,
        metadata={"trained_at": trained_at, "label": args.label, "family": family},
    )
    acceptance = float(np.mean(ocsvm.score_many(model, real.matrix) >= model.threshold))
    Path(args.out).write_bytes(ocsvm.save_model(model))
    print(json.dumps({
        "model": str(args.out),
        "gamma": gamma,
        "nu": nu,
        "threshold": model.threshold,
        "training_acceptance": acceptance,
        "n_train": model.n_train,
        "family": family,
        "target": target,
    }))
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    model = ocsvm.load_model(Path(args.model).read_bytes())
    files = []
    for path in args.inputs:
        vs = correlation.read_vector_csv(Path(path).read_bytes())
        if len(vs):
            scores = ocsvm.score_many(model, vs.matrix, feature_order_hash=vs.feature_order_hash)
        else:
            if vs.feature_order_hash != model.feature_order_hash:
                raise IncompatibilityError(
                    f"feature order {vs.feature_order_hash!r} does not match model's "
                    f"{model.feature_order_hash!r}"
                )
            scores = np.zeros(0)
        verdicts = scores >= model.threshold
        files.append({
            "path": str(path),
            "n_clips": len(vs),
            "fraction_target": float(np.mean(verdicts)) if len(vs) else 0.0,
            "clips": [
                {
                    "source_id": sid,
                    "start_time": float(t),
                    "score": float(s),
                    "verdict": "target" if v else "non-target",
                }
                for sid, t, s, v in zip(vs.source_ids, vs.start_times, scores, verdicts)
            ],
        })
        log.info("%s: %d/%d clips scored as target", path, int(np.sum(verdicts)), len(vs))

    payload = json.dumps({"model": str(args.model), "threshold": model.threshold, "files": files}, indent=1)
    if args.table:
        width = max((len(f["path"]) for f in files), default=4)
        print(f"{'file':<{width}}  {'clips':>6}  {'target%':>8}")
        for f in files:
            print(f"{f['path']:<{width}}  {f['n_clips']:>6}  {100 * f['fraction_target']:>7.1f}%")
        if args.out:
            Path(args.out).write_text(payload)
    elif args.out:
        Path(args.out).write_text(payload)
    else:
        print(payload)
    return EXIT_OK


def _labeled_sets(args, settings) -> tuple[evaluation.LabeledClipSet, list[evaluation.LabeledClipSet]]:
    real = _read_vector_files(args.real)
    real_set = evaluation.LabeledClipSet(
        name=args.real_name, matrix=real.matrix,
        label=evaluation.TARGET_LABEL, feature_order_hash=real.feature_order_hash,
    )
    decoys = []
    for spec in args.decoy or []:
        name, _, path = spec.rpartition("=")
        name = name or Path(path).stem
        vs = _read_vector_files([path])
        decoys.append(evaluation.LabeledClipSet(
            name=name, matrix=vs.matrix,
            label=evaluation.NON_TARGET_LABEL, feature_order_hash=vs.feature_order_hash,
        ))
    return real_set, decoys


def _emit_report(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        print(text)


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    real_set, decoys = _labeled_sets(args, settings)
    family = args.family
    report = evaluation.feature_family_eval(
        family, real_set, decoys, _grid_from(settings),
        target=float(settings.get("target", None)) if settings.get("target", None) else None,
        repeats=int(settings.get("repeats", 100, int)),
        train_frac=float(settings.get("train_frac", 0.8)),
        seed=settings.seed(),
        jobs=int(settings.get("jobs", 1, int)),
    )
    print(report.to_table(), file=sys.stderr)
    _emit_report(report.to_json(), args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = Settings(args)
    real_set, decoys = _labeled_sets(args, settings)
    sizes = [int(v) for v in str(settings.get("sizes", "10,25,50,100,200,300,400,496", str)).split(",")]
    report = evaluation.subset_sweep(
        real_set, decoys, sizes,
        samples_per_size=int(settings.get("samples", 25, int)),
        seed=settings.seed(),
        train_frac=float(settings.get("train_frac", 0.8)),
        gamma=settings.get("gamma", None),
        nu=float(settings.get("nu", 0.1)),
        target=float(settings.get("target", evaluation.SINGLE_FAMILY_TARGET)),
    )
    _emit_report(report.to_json(), args.out)
    return EXIT_OK


def cmd_importance(args: argparse.Namespace) -> int:
    settings = Settings(args)
    real_set, decoys = _labeled_sets(args, settings)
    table = evaluation.feature_importance(
        real_set, decoys,
        n_classifiers=int(settings.get("classifiers", 500, int)),
        subset_size=int(settings.get("subset_size", 10, int)),
        seed=settings.seed(),
        train_frac=float(settings.get("train_frac", 0.8)),
        gamma=settings.get("gamma", None),
        nu=float(settings.get("nu", 0.1)),
        target=float(settings.get("target", evaluation.SINGLE_FAMILY_TARGET)),
    )
    _emit_report(table.to_json(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mannerist",
        description="Behavioral-mannerism fingerprinting for video identity verification.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="RNG seed (chosen and reported if omitted)")
        p.add_argument("--jobs", type=int, help="concurrency bound (default 1)")

    p = sub.add_parser("synth", help="generate synthetic persona feature CSVs")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--separation", type=float, help="correlation-target separation (default 3)")
    p.add_argument("--duration", type=float, help="seconds of footage per persona (default 600)")
    p.add_argument("--fps", type=float, help="frame rate (default 30)")
    p.add_argument("--ar-coeff", type=float, help="temporal smoothness in [0, 1) (default 0.95)")
    p.add_argument("--label-a", default="target")
    p.add_argument("--label-b", default="impostor")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="canonical CSVs -> per-clip correlation vectors")
    common(p)
    p.add_argument("inputs", nargs="+", help="canonical feature CSV files")
    p.add_argument("--fps", type=float, help="frame rate of the input files")
    p.add_argument("--window", type=float, help="clip length in seconds (default 10)")
    p.add_argument("--stride", type=float, help="clip stride in seconds (default 5)")
    p.add_argument("--motion-threshold", type=float, help="camera-motion cutoff (default 0.05)")
    p.add_argument("--out-dir", help="output directory (default: next to each input)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="grid-search, train and calibrate a model")
    common(p)
    p.add_argument("--real", nargs="+", required=True, help="authentic feature-vector files")
    p.add_argument("--decoy", nargs="*", help="impostor feature-vector files")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--family", choices=correlation.FAMILIES, default="combined")
    p.add_argument("--target", type=float, help="calibration target (default 0.99 combined, 0.95 single)")
    p.add_argument("--gammas", help="comma-separated kernel widths")
    p.add_argument("--nus", help="comma-separated outlier fractions")
    p.add_argument("--label", default="", help="persona label stored in the model")
    p.add_argument("--trained-at", help="date stamp stored in the model (default: today UTC)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="score feature-vector files against a model")
    p.add_argument("--model", required=True)
    p.add_argument("inputs", nargs="+", help="feature-vector files")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--table", action="store_true", help="print a summary table instead of JSON")
    p.set_defaults(func=cmd_classify)

    def eval_common(p):
        common(p)
        p.add_argument("--real", nargs="+", required=True)
        p.add_argument("--real-name", default="real")
        p.add_argument("--decoy", nargs="*", metavar="NAME=FILE")
        p.add_argument("--train-frac", type=float)
        p.add_argument("--target", type=float)
        p.add_argument("--out", help="report JSON path (default: stdout)")

    p = sub.add_parser("evaluate", help="repeated-split accuracy report")
    eval_common(p)
    p.add_argument("--family", choices=correlation.FAMILIES, default="combined")
    p.add_argument("--repeats", type=int)
    p.add_argument("--gammas", help="comma-separated kernel widths")
    p.add_argument("--nus", help="comma-separated outlier fractions")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="accuracy vs random-feature-subset size")
    eval_common(p)
    p.add_argument("--sizes", help="comma-separated subset sizes")
    p.add_argument("--samples", type=int, help="subsets per size (default 25)")
    p.add_argument("--gamma", type=float, help="kernel width (default 1/size)")
    p.add_argument("--nu", type=float, help="outlier fraction (default 0.1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("importance", help="per-feature-pair discriminative power")
    eval_common(p)
    p.add_argument("--classifiers", type=int, help="number of random classifiers (default 500)")
    p.add_argument("--subset-size", type=int, help="features per classifier (default 10)")
    p.add_argument("--gamma", type=float, help="kernel width (default 1/size)")
    p.add_argument("--nu", type=float, help="outlier fraction (default 0.1)")
    p.set_defaults(func=cmd_importance)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (ParseError, OrderingError, ValidationError, SchemaError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except InsufficientDataError as exc:
        log.error("%s", exc)
        return EXIT_INSUFFICIENT
    except IncompatibilityError as exc:
        log.error("%s", exc)
        return EXIT_INCOMPATIBLE
    except ConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except MannersError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
