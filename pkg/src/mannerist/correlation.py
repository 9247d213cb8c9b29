"""Pairwise Pearson-correlation features over clip windows.

Each clip's 32 channel time series collapse into a 496-dimensional vector:
one sample correlation per unordered channel pair, in lexicographic pair
order. Correlations are computed two-pass (mean first, then centered
moments) for stability on long windows with large means.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, OrderingError, ParseError
from .features import FEATURE_NAMES, FEATURE_ORDER_HASH, N_FEATURES
from .preprocess import Clip

N_PAIRS = N_FEATURES * (N_FEATURES - 1) // 2  # 496

# lexicographic pair order: (0,1), (0,2), ..., (0,31), (1,2), ...
PAIR_I, PAIR_J = (a.astype(np.int64) for a in np.triu_indices(N_FEATURES, k=1))


def pair_index(i: int, j: int) -> int:
    """Position of channel pair (i, j), i < j, in the flattened vector."""
    if not (0 <= i < N_FEATURES and 0 <= j < N_FEATURES):
        raise ValueError(f"channel indices must be in [0, {N_FEATURES - 1}], got ({i}, {j})")
    if i >= j:
        raise OrderingError(f"pair index requires i < j, got ({i}, {j})")
    return i * (2 * N_FEATURES - i - 1) // 2 + (j - i - 1)


def pair_channels(idx: int) -> tuple[int, int]:
    """Inverse of pair_index."""
    if not 0 <= idx < N_PAIRS:
        raise ValueError(f"pair index must be in [0, {N_PAIRS - 1}], got {idx}")
    return int(PAIR_I[idx]), int(PAIR_J[idx])


def pair_name(idx: int) -> str:
    i, j = pair_channels(idx)
    return f"{FEATURE_NAMES[i]}~{FEATURE_NAMES[j]}"


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation of two equal-length series.

    A series with zero variance (all values equal) correlates at 0.0 by
    convention: a constant channel carries no co-movement evidence.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"series shapes differ: {xa.shape} vs {ya.shape}")
    n = len(xa)
    if n < 2:
        raise InsufficientDataError(f"correlation needs at least 2 samples, got {n}")
    if xa.max() == xa.min() or ya.max() == ya.min():
        return 0.0
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = np.sqrt(xc.dot(xc) * yc.dot(yc))
    return float(np.clip(xc.dot(yc) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationVector:
    """All 496 pairwise correlations of one clip, plus the channel-table digest."""

    values: np.ndarray  # (496,) in [-1, 1]
    feature_order_hash: str = FEATURE_ORDER_HASH

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != (N_PAIRS,):
            raise ValueError(f"expected {N_PAIRS} correlations, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def correlation_matrix(series: np.ndarray) -> np.ndarray:
    """Two-pass sample correlation matrix of (n_samples, n_channels) data.

    Constant channels get zero correlation with everything (and with
    themselves, off the unit diagonal). Entries are clamped to [-1, 1].
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d series matrix, got shape {x.shape}")
    if len(x) < 2:
        raise InsufficientDataError(f"correlation needs at least 2 samples, got {len(x)}")
    constant = x.max(axis=0) == x.min(axis=0)
    xc = x - x.mean(axis=0)
    ss = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    safe = np.where(ss > 0, ss, 1.0)
    corr = (xc.T @ xc) / np.outer(safe, safe)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def clip_features(clip: Clip) -> CorrelationVector:
    """Featurize one clip into its pairwise-correlation vector."""
    if clip.n_frames < 2:
        raise InsufficientDataError(f"clip has {clip.n_frames} frame(s); need >= 2")
    corr = correlation_matrix(clip.features)
    return CorrelationVector(values=corr[PAIR_I, PAIR_J])


FAMILIES = ("facial", "gestural", "combined")
_FACIAL_CHANNELS = set(range(0, 20))
_GESTURAL_CHANNELS = set(range(20, 32))


def family_dims(family: str) -> np.ndarray:
    """Vector positions of the pairs internal to a feature family.

    facial: both channels facial (190 dims); gestural: both gestural
    (66 dims); combined: every pair (496 dims).
    """
    if family == "combined":
        return np.arange(N_PAIRS, dtype=np.int64)
    if family == "facial":
        keep = np.isin(PAIR_I, list(_FACIAL_CHANNELS)) & np.isin(PAIR_J, list(_FACIAL_CHANNELS))
    elif family == "gestural":
        keep = np.isin(PAIR_I, list(_GESTURAL_CHANNELS)) & np.isin(PAIR_J, list(_GESTURAL_CHANNELS))
    else:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return np.flatnonzero(keep).astype(np.int64)


@dataclass(frozen=True)
class VectorSet:
    """Correlation vectors of many clips, as loaded from a feature-vector file."""

    feature_order_hash: str
    source_ids: tuple[str, ...]
    start_times: np.ndarray   # (m,)
    matrix: np.ndarray        # (m, 496)

    def __post_init__(self):
        st = np.array(self.start_times, dtype=np.float64, copy=True)
        mat = np.array(self.matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2 or mat.shape[1] != N_PAIRS:
            raise ValueError(f"expected an (m, {N_PAIRS}) matrix, got {mat.shape}")
        if not len(self.source_ids) == len(st) == len(mat):
            raise ValueError("source_ids, start_times and matrix disagree on clip count")
        st.setflags(write=False)
        mat.setflags(write=False)
        object.__setattr__(self, "start_times", st)
        object.__setattr__(self, "matrix", mat)

    def __len__(self) -> int:
        return len(self.matrix)


def write_vector_csv(
    vectors: Sequence[CorrelationVector],
    source_ids: Sequence[str],
    start_times: Sequence[float],
) -> bytes:
    """Serialize clip vectors: a `# order=` comment line, then one row per clip."""
    if not len(vectors) == len(source_ids) == len(start_times):
        raise ValueError("vectors, source_ids and start_times must align")
    hashes = {v.feature_order_hash for v in vectors}
    order = hashes.pop() if hashes else FEATURE_ORDER_HASH
    if hashes:
        raise ValueError("vectors carry conflicting feature-order hashes")
    buf = io.StringIO()
    buf.write(f"# order={order}\n")
    for sid, t, vec in zip(source_ids, start_times, vectors):
        row = ",".join([sid, repr(float(t))] + [repr(float(v)) for v in vec.values])
        buf.write(row + "\n")
    return buf.getvalue().encode("utf-8")


def read_vector_csv(data: bytes) -> VectorSet:
    """Parse a feature-vector file back into a VectorSet."""
    text = data.decode("utf-8")
    order = None
    source_ids: list[str] = []
    start_times: list[float] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            stripped = line[1:].strip()
            if stripped.startswith("order="):
                order = stripped[len("order="):]
            continue
        parts = line.split(",")
        if len(parts) != 2 + N_PAIRS:
            raise ParseError(f"expected {2 + N_PAIRS} fields, got {len(parts)}", row=lineno)
        try:
            start_times.append(float(parts[1]))
            rows.append([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise ParseError(f"non-numeric value: {exc}", row=lineno) from None
        source_ids.append(parts[0])
    if order is None:
        raise ParseError("missing '# order=' comment line")
    return VectorSet(
        feature_order_hash=order,
        source_ids=tuple(source_ids),
        start_times=np.asarray(start_times, dtype=np.float64),
        matrix=np.asarray(rows, dtype=np.float64).reshape(len(rows), N_PAIRS),
    )
