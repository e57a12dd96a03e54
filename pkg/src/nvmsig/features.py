"""Feature standardization and selection.

Two selectors are provided: a mutual-information filter (greedy
relevance-minus-redundancy) and a gradient-ascent neighborhood scorer that
learns per-feature weights.  Both return a FeatureRanking that downstream
models apply before classification.  The neighborhood scorer is
distance-based, so run it on standardized features; the MI filter bins each
feature over its own range and is unaffected by per-feature affine scaling.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError

DEFAULT_BINS = 16
DEFAULT_K = 25

# optional cap for the neighborhood scorer on big training sets: when enabled
# and n > SUBSAMPLE_THRESHOLD, a seeded stratified-ish draw of SUBSAMPLE_SIZE
# rows is used for the weight fit (ranking only; no model sees the subsample)
SUBSAMPLE_THRESHOLD = 1500
SUBSAMPLE_SIZE = 1000
_SUBSAMPLE_SEED = 0x5EED


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValidationError("mean/std must be matching 1-D vectors")
        if np.any(self.std < 0):
            raise ValidationError("std must be non-negative")


@dataclass(frozen=True)
class FeatureRanking:
    """Selected feature indices in rank order plus their selection scores."""
    method: str
    indices: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64))
        if self.indices.ndim != 1 or self.indices.shape != self.scores.shape:
            raise ValidationError("indices/scores must be matching 1-D vectors")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValidationError("ranking contains duplicate feature indices")

    def __len__(self):
        return len(self.indices)


def fit_standardizer(X) -> StandardizationStats:
    X = _check_matrix(X)
    return StandardizationStats(X.mean(axis=0), X.std(axis=0))


def apply_standardizer(stats: StandardizationStats, X) -> np.ndarray:
    """Z-score per feature; features with zero training spread map to 0."""
    X = _check_matrix(X)
    if X.shape[1] != stats.mean.shape[0]:
        raise ValidationError(
            f"expected {stats.mean.shape[0]} features, got {X.shape[1]}")
    dead = stats.std == 0
    safe = np.where(dead, 1.0, stats.std)
    out = (X - stats.mean) / safe
    out[:, dead] = 0.0
    return out


def _check_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError("expected a non-empty 2-D sample matrix")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    return X


def bin_feature(feature, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width bin indices over [min, max]; constant input -> all bin 0."""
    x = np.asarray(feature, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError("feature must be a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValidationError("feature values must be finite")
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.size, dtype=np.int64)
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def mutual_information(feature, labels, bins: int = DEFAULT_BINS) -> float:
    """MI in nats between an equal-width-binned feature and integer labels."""
    labels = _check_labels(labels)
    bf = bin_feature(feature, bins)
    if bf.size != labels.size:
        raise ValidationError("feature and labels lengths differ")
    _, li = np.unique(labels, return_inverse=True)
    n_l = li.max() + 1
    joint = np.bincount(bf * n_l + li, minlength=bins * n_l).astype(np.float64)
    joint = joint.reshape(bins, n_l) / bf.size
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    denom = np.outer(px, py)
    return float(np.sum(joint[nz] * np.log(joint[nz] / denom[nz])))


def _check_labels(labels):
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValidationError("labels must be integers")
    if labels.ndim != 1 or labels.size == 0:
        raise ValidationError("labels must be a non-empty 1-D vector")
    return labels.astype(np.int64)


def _entropy(counts) -> float:
    p = np.asarray(counts, dtype=np.float64)
    p = p[p > 0] / p.sum()
    return float(-np.sum(p * np.log(p)))


def mrmr_select(train, k: int = DEFAULT_K, bins: int = DEFAULT_BINS) -> FeatureRanking:
    """Greedy max-relevance min-redundancy filter (difference form).

    Picks argmax of MI(f, y) - mean MI(f, s) over already-selected s, ties
    broken toward the lowest feature index, so any shorter run is a prefix
    of a longer one.
    """
    X, y = _train_xy(train)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValidationError(f"k must be in [1, {d}]")
    binned = np.stack([bin_feature(X[:, j], bins) for j in range(d)])
    relevance = np.array([mutual_information(X[:, j], y, bins) for j in range(d)])

    selected: list[int] = []
    scores: list[float] = []
    redundancy_sum = np.zeros(d)
    remaining = np.ones(d, dtype=bool)
    for _ in range(k):
        if selected:
            score = relevance - redundancy_sum / len(selected)
        else:
            score = relevance.copy()
        score[~remaining] = -np.inf
        best = int(np.argmax(score))  # argmax takes the lowest index on ties
        selected.append(best)
        scores.append(float(score[best]))
        remaining[best] = False
        for j in np.nonzero(remaining)[0]:
            redundancy_sum[j] += mutual_information(X[:, j], binned[best], bins)
    return FeatureRanking("mrmr", np.array(selected), np.array(scores))


def nca_objective(w, X, y) -> float:
    """Mean leave-one-out soft neighbor probability under weights w."""
    p_i, _ = _nca_forward(np.asarray(w, dtype=np.float64), X, y)
    return float(p_i.mean())


def nca_gradient(w, X, y) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    p_i, p = _nca_forward(w, X, y)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    same = (y[:, None] == y[None, :]).astype(np.float64)
    # d objective / d w_m = (2 w_m / n) sum_ij M_ij (x_im - x_jm)^2
    # with M_ij = p_i p_ij - p_ij [y_i == y_j]; the quadratic expands into
    # row/column sums plus one matrix product, no n x n x d tensor needed
    with np.errstate(over="ignore", invalid="ignore"):
        M = p_i[:, None] * p - same * p
        r = M.sum(axis=1)
        c = M.sum(axis=0)
        sq = X * X
        cross = (X * (M @ X)).sum(axis=0)
        s = sq.T @ r + sq.T @ c - 2.0 * cross
        return (2.0 * w / n) * s


def _nca_forward(w, X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    # overflow here shows up as non-finite output and is caught by the
    # gradient check in nca_select, so keep numpy quiet about it
    with np.errstate(over="ignore", invalid="ignore"):
        Z = X * w
        g = Z @ Z.T
        sq = np.diag(g)
        d2 = sq[:, None] + sq[None, :] - 2.0 * g
        np.fill_diagonal(d2, np.inf)
        logits = -d2
        shift = logits.max(axis=1, keepdims=True)
        ex = np.exp(logits - shift)
        p = ex / ex.sum(axis=1, keepdims=True)
    same = y[:, None] == y[None, :]
    p_i = np.where(same, p, 0.0).sum(axis=1)
    return p_i, p


def nca_select(train, k: int = DEFAULT_K, iters: int = 200,
               learning_rate: float = 0.01, subsample: bool = False) -> FeatureRanking:
    """Per-feature weights by gradient ascent on LOO neighbor agreement.

    Weights start at 1, features are ranked by final |w| (descending, ties
    toward the lowest index).  Expects standardized features.  With
    `subsample`, training sets above SUBSAMPLE_THRESHOLD rows are cut to a
    seeded draw of SUBSAMPLE_SIZE rows for the fit.
    """
    X, y = _train_xy(train)
    d = X.shape[1]
    if not 1 <= k <= d:
        raise ValidationError(f"k must be in [1, {d}]")
    if iters < 1 or learning_rate <= 0:
        raise ValidationError("iters must be >= 1 and learning_rate > 0")
    if subsample and X.shape[0] > SUBSAMPLE_THRESHOLD:
        rng = np.random.default_rng(_SUBSAMPLE_SEED)
        keep = np.sort(rng.choice(X.shape[0], size=SUBSAMPLE_SIZE, replace=False))
        X, y = X[keep], y[keep]

    w = np.ones(d)
    for it in range(iters):
        grad = nca_gradient(w, X, y)
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"weight gradient non-finite at iteration {it}")
        w = w + learning_rate * grad
    order = np.lexsort((np.arange(d), -np.abs(w)))[:k]
    return FeatureRanking("nca", order, np.abs(w)[order])


def _train_xy(train):
    X = _check_matrix(train.X)
    y = _check_labels(train.y)
    if X.shape[0] != y.size:
        raise ValidationError("X and y row counts differ")
    if len(np.unique(y)) < 2:
        raise ValidationError("need at least 2 classes")
    return X, y
