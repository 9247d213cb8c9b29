"""Evaluation protocol: repeated splits, family comparisons, ablations.

Clips are split 80/20 into training and held-out sides many times; each
repeat grid-searches hyperparameters on the training side, calibrates the
decision threshold there, and reports held-out accuracy per clip set.
Accuracy for a target set is the fraction of clips accepted; for a
non-target set, the fraction rejected.

All randomness flows from one master seed through named per-repeat
(or per-classifier) child streams, so reports are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlation import FAMILIES, N_PAIRS, family_dims, pair_channels
from .errors import IncompatibilityError, InsufficientDataError
from .features import FEATURE_NAMES
from .ocsvm import HyperGrid, calibrate_threshold, grid_search, score_many, train

TARGET_LABEL = "target"
NON_TARGET_LABEL = "non-target"

SINGLE_FAMILY_TARGET = 0.95
COMBINED_TARGET = 0.99


@dataclass(frozen=True)
class LabeledClipSet:
    """A named collection of clip vectors sharing one ground-truth label."""

    name: str
    matrix: np.ndarray  # (m, 496)
    label: str
    feature_order_hash: str

    def __post_init__(self):
        if self.label not in (TARGET_LABEL, NON_TARGET_LABEL):
            raise ValueError(f"label must be {TARGET_LABEL!r} or {NON_TARGET_LABEL!r}")
        mat = np.array(self.matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2 or mat.shape[1] != N_PAIRS:
            raise ValueError(f"expected an (m, {N_PAIRS}) matrix, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def __len__(self) -> int:
        return len(self.matrix)


@dataclass(frozen=True)
class PerSetStats:
    name: str
    n_clips: int
    accuracy_mean: float
    accuracy_std: float
    accuracies: tuple[float, ...] = ()  # per-repeat values; not serialized


@dataclass(frozen=True)
class DatasetReport:
    """Held-out accuracy per clip set, aggregated over repeats."""

    protocol: str
    seed: int
    repeats: int
    family: str
    per_set: tuple[PerSetStats, ...]

    def accuracy(self, name: str) -> float:
        for s in self.per_set:
            if s.name == name:
                return s.accuracy_mean
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps({
            "protocol": self.protocol,
            "seed": self.seed,
            "repeats": self.repeats,
            "family": self.family,
            "per_set": [
                {
                    "name": s.name,
                    "n_clips": s.n_clips,
                    "accuracy_mean": s.accuracy_mean,
                    "accuracy_std": s.accuracy_std,
                }
                for s in self.per_set
            ],
        }, indent=1)

    def to_table(self) -> str:
        """Plain-text accuracy table (one row per clip set, percentages)."""
        width = max(len(s.name) for s in self.per_set)
        lines = [f"{'set':<{width}}  {'clips':>6}  {'accuracy':>9}  {'std':>7}"]
        for s in self.per_set:
            lines.append(
                f"{s.name:<{width}}  {s.n_clips:>6}  {100 * s.accuracy_mean:>8.1f}%  "
                f"{100 * s.accuracy_std:>6.1f}%"
            )
        return "\n".join(lines)


def _check_hashes(real: LabeledClipSet, decoys: Sequence[LabeledClipSet]) -> str:
    hashes = {real.feature_order_hash, *(d.feature_order_hash for d in decoys)}
    if len(hashes) != 1:
        raise IncompatibilityError(f"clip sets carry conflicting feature orders: {sorted(hashes)}")
    return real.feature_order_hash


def _split(rng: np.random.Generator, n: int, train_frac: float) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    cut = int(train_frac * n)
    cut = min(max(cut, 1), n - 1)
    return perm[:cut], perm[cut:]


def repeated_split_eval(
    real: LabeledClipSet,
    decoys: Sequence[LabeledClipSet],
    grid: HyperGrid,
    target: float,
    *,
    repeats: int = 100,
    train_frac: float = 0.8,
    seed: int = 0,
    dims: Sequence[int] | None = None,
    family: str = "combined",
    jobs: int = 1,
    decoys_in_grid: bool = True,
) -> DatasetReport:
    """Average held-out accuracy per set over seeded randomized splits.

    ``decoys_in_grid=False`` keeps the decoy training halves out of the
    grid-search objective (selection then falls back to authentic-clip
    acceptance); decoys are still split and evaluated. Use this when the
    decoys are a calibration probe rather than a training adversary.
    """
    if len(real) < 5:
        raise InsufficientDataError(f"need at least 5 authentic clips, got {len(real)}")
    if not 0 < train_frac < 1:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    order_hash = _check_hashes(real, decoys)

    children = np.random.SeedSequence(seed).spawn(repeats)
    names = [real.name] + [d.name for d in decoys]
    accuracies: dict[str, list[float]] = {name: [] for name in names}

    for child in children:
        rng = np.random.default_rng(child)
        tr, te = _split(rng, len(real), train_frac)
        real_train, real_test = real.matrix[tr], real.matrix[te]
        decoy_train_parts, decoy_tests = [], []
        for d in decoys:
            dtr, dte = _split(rng, len(d), train_frac)
            decoy_train_parts.append(d.matrix[dtr])
            decoy_tests.append(d.matrix[dte])
        decoy_train = None
        if decoys_in_grid and decoy_train_parts:
            decoy_train = np.vstack(decoy_train_parts)

        _, _, model = grid_search(
            real_train, decoy_train, grid, target,
            jobs=jobs, dims=dims, feature_order_hash=order_hash,
        )
        accuracies[real.name].append(float(np.mean(score_many(model, real_test) >= model.threshold)))
        for d, dte_m in zip(decoys, decoy_tests):
            accuracies[d.name].append(float(np.mean(score_many(model, dte_m) < model.threshold)))

    n_by_name = {real.name: len(real), **{d.name: len(d) for d in decoys}}
    per_set = tuple(
        PerSetStats(
            name=name,
            n_clips=n_by_name[name],
            accuracy_mean=float(np.mean(accuracies[name])),
            accuracy_std=float(np.std(accuracies[name])),
            accuracies=tuple(accuracies[name]),
        )
        for name in names
    )
    pct = int(round(train_frac * 100))
    return DatasetReport(
        protocol=f"split-{pct}/{100 - pct}x{repeats}",
        seed=seed,
        repeats=repeats,
        family=family,
        per_set=per_set,
    )


def feature_family_eval(
    family: str,
    real: LabeledClipSet,
    decoys: Sequence[LabeledClipSet],
    grid: HyperGrid,
    *,
    target: float | None = None,
    repeats: int = 100,
    train_frac: float = 0.8,
    seed: int = 0,
    jobs: int = 1,
) -> DatasetReport:
    """Evaluate on one feature family's pair dimensions.

    Single families calibrate at 95% training acceptance, the combined
    set at 99%, unless an explicit target overrides.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if target is None:
        target = COMBINED_TARGET if family == "combined" else SINGLE_FAMILY_TARGET
    dims = family_dims(family)
    return repeated_split_eval(
        real, decoys, grid, target,
        repeats=repeats, train_frac=train_frac, seed=seed,
        dims=dims, family=family, jobs=jobs,
    )


@dataclass(frozen=True)
class SizeStats:
    size: int
    median: float
    q25: float
    q75: float


@dataclass(frozen=True)
class SweepReport:
    """Accuracy quantiles per feature-subset size."""

    protocol: str
    seed: int
    samples_per_size: int
    per_size: tuple[SizeStats, ...]

    def to_json(self) -> str:
        return json.dumps({
            "protocol": self.protocol,
            "seed": self.seed,
            "samples_per_size": self.samples_per_size,
            "per_size": [
                {"size": s.size, "median": s.median, "q25": s.q25, "q75": s.q75}
                for s in self.per_size
            ],
        }, indent=1)


def _fixed_split_pools(
    real: LabeledClipSet,
    decoys: Sequence[LabeledClipSet],
    rng: np.random.Generator,
    train_frac: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One split shared by every subset sample: (real train, non-target pool)."""
    tr, _ = _split(rng, len(real), train_frac)
    pools = []
    for d in decoys:
        _, dte = _split(rng, len(d), train_frac)
        pools.append(d.matrix[dte])
    if not pools:
        raise InsufficientDataError("subset studies need at least one non-target set")
    return real.matrix[tr], np.vstack(pools)


def _subset_accuracy(
    real_train: np.ndarray,
    pool: np.ndarray,
    dims: np.ndarray,
    *,
    gamma: float | None,
    nu: float,
    target: float,
    order_hash: str,
) -> float:
    g = gamma if gamma is not None else 1.0 / len(dims)
    model = train(real_train, g, nu, dims=dims, feature_order_hash=order_hash)
    cutoff = calibrate_threshold(score_many(model, real_train), target)
    return float(np.mean(score_many(model, pool) < cutoff))


def subset_sweep(
    real: LabeledClipSet,
    decoys: Sequence[LabeledClipSet],
    sizes: Sequence[int],
    samples_per_size: int = 25,
    *,
    seed: int = 0,
    train_frac: float = 0.8,
    gamma: float | None = None,
    nu: float = 0.1,
    target: float = SINGLE_FAMILY_TARGET,
) -> SweepReport:
    """Non-target accuracy quantiles for random feature subsets of each size.

    All subsets share one fixed train/test split. ``gamma=None`` scales the
    kernel width as 1/size so distances stay comparable across sizes.
    """
    sizes = [int(s) for s in sizes]
    if any(not 1 <= s <= N_PAIRS for s in sizes):
        raise ValueError(f"subset sizes must lie in [1, {N_PAIRS}]")
    order_hash = _check_hashes(real, decoys)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    real_train, pool = _fixed_split_pools(real, decoys, rng, train_frac)

    per_size = []
    for size in sizes:
        accs = [
            _subset_accuracy(
                real_train, pool,
                np.sort(rng.choice(N_PAIRS, size=size, replace=False)),
                gamma=gamma, nu=nu, target=target, order_hash=order_hash,
            )
            for _ in range(samples_per_size)
        ]
        q25, med, q75 = np.quantile(accs, [0.25, 0.5, 0.75])
        per_size.append(SizeStats(size=size, median=float(med), q25=float(q25), q75=float(q75)))

    return SweepReport(
        protocol=f"subset-sweep-x{samples_per_size}",
        seed=seed,
        samples_per_size=samples_per_size,
        per_size=tuple(per_size),
    )


@dataclass(frozen=True)
class ImportanceEntry:
    pair: int
    feature_a: str
    feature_b: str
    count: int
    mean_accuracy: float


@dataclass(frozen=True)
class ImportanceTable:
    """Per feature-pair: how well classifiers containing it performed.

    Pairs never drawn into any subset are listed in ``absent`` rather than
    given a (meaningless) zero score. ``accuracy_range`` spans all trained
    classifiers.
    """

    protocol: str
    seed: int
    n_classifiers: int
    subset_size: int
    entries: tuple[ImportanceEntry, ...]
    absent: tuple[int, ...]
    accuracy_range: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps({
            "protocol": self.protocol,
            "seed": self.seed,
            "n_classifiers": self.n_classifiers,
            "subset_size": self.subset_size,
            "accuracy_range": list(self.accuracy_range),
            "entries": [
                {
                    "pair": e.pair,
                    "feature_a": e.feature_a,
                    "feature_b": e.feature_b,
                    "count": e.count,
                    "mean_accuracy": e.mean_accuracy,
                }
                for e in self.entries
            ],
            "absent": list(self.absent),
        }, indent=1)


def feature_importance(
    real: LabeledClipSet,
    decoys: Sequence[LabeledClipSet],
    n_classifiers: int = 500,
    subset_size: int = 10,
    *,
    seed: int = 0,
    train_frac: float = 0.8,
    gamma: float | None = None,
    nu: float = 0.1,
    target: float = SINGLE_FAMILY_TARGET,
) -> ImportanceTable:
    """Rank feature pairs by the mean accuracy of subsets containing them."""
    if not 1 <= subset_size <= N_PAIRS:
        raise ValueError(f"subset_size must lie in [1, {N_PAIRS}]")
    order_hash = _check_hashes(real, decoys)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    real_train, pool = _fixed_split_pools(real, decoys, rng, train_frac)

    counts = np.zeros(N_PAIRS, dtype=np.int64)
    acc_sums = np.zeros(N_PAIRS)
    all_accs = []
    for _ in range(n_classifiers):
        dims = np.sort(rng.choice(N_PAIRS, size=subset_size, replace=False))
        acc = _subset_accuracy(
            real_train, pool, dims,
            gamma=gamma, nu=nu, target=target, order_hash=order_hash,
        )
        counts[dims] += 1
        acc_sums[dims] += acc
        all_accs.append(acc)

    entries = []
    for pair in np.flatnonzero(counts > 0):
        i, j = pair_channels(int(pair))
        entries.append(ImportanceEntry(
            pair=int(pair),
            feature_a=FEATURE_NAMES[i],
            feature_b=FEATURE_NAMES[j],
            count=int(counts[pair]),
            mean_accuracy=float(acc_sums[pair] / counts[pair]),
        ))
    entries.sort(key=lambda e: (-e.mean_accuracy, e.pair))

    return ImportanceTable(
        protocol=f"importance-{n_classifiers}x{subset_size}",
        seed=seed,
        n_classifiers=n_classifiers,
        subset_size=subset_size,
        entries=tuple(entries),
        absent=tuple(int(p) for p in np.flatnonzero(counts == 0)),
        accuracy_range=(float(np.min(all_accs)), float(np.max(all_accs))),
    )
