"""One-class nu-SVM with Gaussian kernel.

Solves the dual

    min_a  1/2 a' K a   s.t.  0 <= a_i <= 1/(nu*n),  sum(a) = 1

with SMO-style pairwise coordinate updates and first-order KKT working-set
selection, then scores points with g(x) = sum_i a_i k(sv_i, x) - rho.
Includes threshold calibration on authentic training scores, a
hyperparameter grid search, and versioned JSON model persistence.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    IncompatibilityError,
    InsufficientDataError,
    SchemaError,
)
from .features import FEATURE_ORDER_HASH

MODEL_SCHEMA_VERSION = "mannerist-model/1"

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1_000_000

# fraction of the box bound below which an alpha snaps to the bound/zero
_SNAP = 1e-12


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """Gaussian kernel exp(-gamma * ||x - y||^2); in (0, 1] for finite inputs."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise ValueError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = xa - ya
    return float(math.exp(-gamma * float(d.dot(d))))


def _sq_dists(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared distances from each row of X to y, clipped at zero."""
    d = np.einsum("ij,ij->i", X, X) + y.dot(y) - 2.0 * (X @ y)
    return np.maximum(d, 0.0)


class KernelRowCache:
    """LRU cache of Gaussian kernel rows over a fixed training matrix.

    Correctness is independent of the byte budget; a small budget only
    changes how often rows are recomputed.
    """

    def __init__(self, X: np.ndarray, gamma: float, budget_bytes: int | None = None):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.gamma = float(gamma)
        self._norms = np.einsum("ij,ij->i", self.X, self.X)
        n = len(self.X)
        row_bytes = max(1, n * 8)
        if budget_bytes is None:
            max_rows = n
        else:
            max_rows = max(2, int(budget_bytes) // row_bytes)
        self.max_rows = min(n, max_rows) if n else 0
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.misses = 0

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        self.misses += 1
        d = self._norms + self._norms[i] - 2.0 * (self.X @ self.X[i])
        row = np.exp(-self.gamma * np.maximum(d, 0.0))
        row[i] = 1.0
        if self.max_rows:
            self._rows[i] = row
            while len(self._rows) > self.max_rows:
                self._rows.popitem(last=False)
        return row


@dataclass(frozen=True)
class HyperGrid:
    """Grid-search space over kernel width and outlier fraction."""

    gammas: tuple[float, ...]
    nus: tuple[float, ...]

    def __post_init__(self):
        if not self.gammas or not self.nus:
            raise ValueError("grid must be non-empty")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be positive")
        if any(not 0 < v < 1 for v in self.nus):
            raise ValueError("nus must lie in (0, 1)")
        object.__setattr__(self, "gammas", tuple(sorted(float(g) for g in self.gammas)))
        object.__setattr__(self, "nus", tuple(sorted(float(v) for v in self.nus)))


def default_grid() -> HyperGrid:
    """Eight log-spaced kernel widths crossed with three outlier fractions.

    The smallest nu is 0.1: below that, nu*n support vectors are too few
    at desk-scale training sizes for the calibrated threshold to hold up
    out of sample.
    """
    return HyperGrid(
        gammas=tuple(2.0 ** e for e in range(-12, 4, 2)),
        nus=(0.1, 0.2, 0.4),
    )


@dataclass(frozen=True)
class SvmModel:
    """Trained one-class model: kernel expansion, offset, calibrated cutoff.

    ``support_vectors`` live in the (possibly projected) training space;
    ``dims`` records which positions of an ``input_dim``-wide vector the
    model consumes, with None meaning all of them.
    """

    support_vectors: np.ndarray   # (m, d)
    alphas: np.ndarray            # (m,) positive, summing to 1
    rho: float
    gamma: float
    nu: float
    threshold: float
    feature_order_hash: str
    n_train: int
    input_dim: int
    dims: tuple[int, ...] | None = None
    metadata: dict = None  # type: ignore[assignment]

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64, copy=True)
        al = np.array(self.alphas, dtype=np.float64, copy=True)
        if sv.ndim != 2 or len(sv) != len(al):
            raise ValueError("support vectors and alphas disagree")
        sv.setflags(write=False)
        al.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "alphas", al)
        object.__setattr__(self, "metadata", dict(self.metadata or {}))

    @property
    def n_support(self) -> int:
        return len(self.alphas)


def _smo(cache: KernelRowCache, nu: float, tol: float, max_iter: int) -> tuple[np.ndarray, float]:
    """Run pairwise coordinate descent; returns (alphas, final KKT violation)."""
    n = len(cache.X)
    box = 1.0 / (nu * n)
    alpha = np.full(n, 1.0 / n)
    snap = box * _SNAP

    # gradient of the dual objective: G = K @ alpha
    grad = np.zeros(n)
    for j in range(n):
        if alpha[j] != 0.0:
            grad += alpha[j] * cache.row(j)

    violation = math.inf
    for _ in range(max_iter):
        can_grow = alpha < box
        can_shrink = alpha > 0.0
        neg = -grad
        i = int(np.argmax(np.where(can_grow, neg, -np.inf)))
        j = int(np.argmin(np.where(can_shrink, neg, np.inf)))
        violation = float(neg[i] - neg[j])
        if violation <= tol:
            return alpha, violation

        row_i = cache.row(i)
        curvature = max(2.0 - 2.0 * float(row_i[j]), 1e-15)
        step = min(violation / curvature, box - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        if box - alpha[i] <= snap:
            alpha[i] = box
        if alpha[j] <= snap:
            alpha[j] = 0.0
        grad += step * (row_i - cache.row(j))

    raise ConvergenceError(
        f"SMO did not converge within {max_iter} iterations", kkt_violation=violation
    )


def train(
    X: np.ndarray,
    gamma: float,
    nu: float,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    cache_bytes: int | None = None,
    dims: Sequence[int] | None = None,
    feature_order_hash: str = FEATURE_ORDER_HASH,
    metadata: dict | None = None,
) -> SvmModel:
    """Fit the one-class model on rows of X.

    When ``dims`` is given, training uses only those vector positions and
    the model remembers the projection, so scoring still takes full-width
    vectors. The decision threshold is initialized to 0 (the raw-score
    boundary); calibrate separately. nu*n >= 1 is recommended, otherwise
    every point is forced against the box bound.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 1:
        raise InsufficientDataError(f"need a non-empty 2-d training matrix, got shape {X.shape}")
    if not 0 < nu <= 1:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    input_dim = X.shape[1]
    dims_t = None
    if dims is not None:
        dims_t = tuple(int(d) for d in dims)
        if any(not 0 <= d < input_dim for d in dims_t):
            raise ValueError("projection dims out of range")
        X = X[:, dims_t]

    n = len(X)
    cache = KernelRowCache(X, gamma, cache_bytes)
    if n == 1:
        alpha = np.ones(1)
        grad = np.ones(1)
    else:
        alpha, _ = _smo(cache, nu, tol, max_iter)
        # one fresh pass over the gradient for an accurate offset
        grad = np.zeros(n)
        for j in range(n):
            if alpha[j] != 0.0:
                grad += alpha[j] * cache.row(j)

    box = 1.0 / (nu * n)
    bound_eps = box * 1e-9
    free = (alpha > bound_eps) & (alpha < box - bound_eps)
    if np.any(free):
        rho = float(np.mean(grad[free]))
    else:
        at_box = alpha >= box - bound_eps
        at_zero = alpha <= bound_eps
        cands = []
        if np.any(at_box):
            cands.append(float(np.max(grad[at_box])))
        if np.any(at_zero):
            cands.append(float(np.min(grad[at_zero])))
        rho = float(np.mean(cands))

    support = alpha > 0.0
    return SvmModel(
        support_vectors=X[support],
        alphas=alpha[support],
        rho=rho,
        gamma=float(gamma),
        nu=float(nu),
        threshold=0.0,
        feature_order_hash=feature_order_hash,
        n_train=n,
        input_dim=input_dim,
        dims=dims_t,
        metadata=metadata,
    )


def score_many(
    model: SvmModel,
    X: np.ndarray,
    *,
    feature_order_hash: str | None = None,
) -> np.ndarray:
    """Decision scores g(x) for each row of X (full input width).

    Callers classify a clip as the target identity iff
    g(x) >= model.threshold. Raises IncompatibilityError when the data's
    feature-order digest does not match the model's.
    """
    if feature_order_hash is not None and feature_order_hash != model.feature_order_hash:
        raise IncompatibilityError(
            f"feature order {feature_order_hash!r} does not match model's "
            f"{model.feature_order_hash!r}"
        )
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim}-wide vectors, got {X.shape[1]}")
    if model.dims is not None:
        X = X[:, list(model.dims)]
    sv = model.support_vectors
    sv_norms = np.einsum("ij,ij->i", sv, sv)
    x_norms = np.einsum("ij,ij->i", X, X)
    d = np.maximum(x_norms[:, None] + sv_norms[None, :] - 2.0 * (X @ sv.T), 0.0)
    return np.exp(-model.gamma * d) @ model.alphas - model.rho


def score(model: SvmModel, x: np.ndarray, *, feature_order_hash: str | None = None) -> float:
    """Decision score of a single vector."""
    return float(score_many(model, np.asarray(x)[None, :], feature_order_hash=feature_order_hash)[0])


def calibrate_threshold(scores: Sequence[float], target: float) -> float:
    """Cutoff accepting at least a ``target`` fraction of the given scores.

    With s sorted ascending, returns s[floor((1 - target) * n)], so
    count(scores >= cutoff) >= target * n always holds.
    """
    s = np.sort(np.asarray(scores, dtype=np.float64))
    if len(s) == 0:
        raise InsufficientDataError("cannot calibrate a threshold on empty scores")
    if not 0 < target < 1:
        raise ValueError(f"target must be in (0, 1), got {target}")
    k = int(math.floor((1.0 - target) * len(s) + 1e-9))
    return float(s[min(k, len(s) - 1)])


def grid_search(
    train_real: np.ndarray,
    train_decoy: np.ndarray | None,
    grid: HyperGrid,
    target: float,
    *,
    jobs: int = 1,
    **train_kwargs,
) -> tuple[float, float, SvmModel]:
    """Pick (gamma, nu) maximizing separation on the training side.

    Each cell trains on the authentic clips and calibrates its threshold
    at ``target``. With decoys the objective is balanced accuracy
    (authentic acceptance + decoy rejection) / 2; without, it is the
    authentic acceptance alone. Exact ties go to the smaller gamma, then
    the smaller nu (cells are visited in that order and replaced only on
    strict improvement).
    """
    train_real = np.asarray(train_real, dtype=np.float64)
    if train_real.ndim != 2 or len(train_real) == 0:
        raise InsufficientDataError("grid search needs a non-empty training matrix")
    cells = [(g, v) for g in grid.gammas for v in grid.nus]

    def fit(cell: tuple[float, float]) -> SvmModel:
        g, v = cell
        return train(train_real, g, v, **train_kwargs)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(fit, cells))
    else:
        models = [fit(c) for c in cells]

    best: tuple[float, float, SvmModel] | None = None
    best_obj = -math.inf
    for (g, v), model in zip(cells, models):
        real_scores = score_many(model, train_real)
        cutoff = calibrate_threshold(real_scores, target)
        model = replace(model, threshold=cutoff)
        tpr = float(np.mean(real_scores >= cutoff))
        if train_decoy is not None and len(train_decoy):
            tnr = float(np.mean(score_many(model, train_decoy) < cutoff))
            objective = (tpr + tnr) / 2.0
        else:
            objective = tpr
        if objective > best_obj:
            best_obj = objective
            best = (g, v, model)
    assert best is not None
    return best


def save_model(model: SvmModel) -> bytes:
    """Versioned JSON serialization; floats round-trip losslessly."""
    meta = dict(model.metadata)
    meta["n_train"] = model.n_train
    payload = {
        "version": MODEL_SCHEMA_VERSION,
        "gamma": model.gamma,
        "nu": model.nu,
        "rho": model.rho,
        "threshold": model.threshold,
        "feature_order_hash": model.feature_order_hash,
        "input_dim": model.input_dim,
        "dims": list(model.dims) if model.dims is not None else None,
        "alphas": [float(a) for a in model.alphas],
        "support_vectors": [[float(v) for v in row] for row in model.support_vectors],
        "metadata": meta,
    }
    return json.dumps(payload, indent=1).encode("utf-8")


def load_model(data: bytes) -> SvmModel:
    """Parse and structurally validate a serialized model."""
    try:
        payload = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError("model file must hold a JSON object")
    version = payload.get("version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaError(f"unsupported model version {version!r}; expected {MODEL_SCHEMA_VERSION!r}")
    required = {
        "gamma", "nu", "rho", "threshold", "feature_order_hash",
        "input_dim", "dims", "alphas", "support_vectors", "metadata",
    }
    missing = required - payload.keys()
    if missing:
        raise SchemaError(f"model file missing keys: {sorted(missing)}")
    try:
        alphas = np.asarray(payload["alphas"], dtype=np.float64)
        sv = np.asarray(payload["support_vectors"], dtype=np.float64)
        if sv.ndim == 1 and sv.size == 0:
            sv = sv.reshape(0, int(payload["input_dim"]))
        meta = dict(payload["metadata"])
        dims = payload["dims"]
        model = SvmModel(
            support_vectors=sv,
            alphas=alphas,
            rho=float(payload["rho"]),
            gamma=float(payload["gamma"]),
            nu=float(payload["nu"]),
            threshold=float(payload["threshold"]),
            feature_order_hash=str(payload["feature_order_hash"]),
            n_train=int(meta.pop("n_train")),
            input_dim=int(payload["input_dim"]),
            dims=tuple(int(d) for d in dims) if dims is not None else None,
            metadata=meta,
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise SchemaError(f"model file violates the schema: {exc}") from exc
    if sv.ndim != 2:
        raise SchemaError("support_vectors must be a rectangular array")
    if not 0 < model.nu <= 1 or not model.gamma > 0:
        raise SchemaError("gamma/nu out of range")
    if len(alphas) and abs(float(alphas.sum()) - 1.0) > 1e-6:
        raise SchemaError("alphas do not sum to 1")
    return model
