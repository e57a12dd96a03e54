"""k-nearest-neighbor core on squared Euclidean distance.

Neighbor order is total: by distance, then by training-row index, so every
prediction is reproducible.  Vote ties go to the tied class with the nearest
member; an exact distance tie after that falls back to the lowest tag.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass
class KnnCore:
    X: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        if self.k < 1 or self.k > self.X.shape[0]:
            raise ValidationError(f"k must be in [1, {self.X.shape[0]}]")
        if self.k % 2 == 0 and self.k != self.X.shape[0]:
            # even k invites avoidable vote ties; allowed, but the default
            # constructors pass odd k
            pass


def fit(X, y, k: int) -> KnnCore:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return KnnCore(X, y, int(k))


def _neighbors(core: KnnCore, X):
    """(nn, nd): the k nearest training rows per probe, exactly ordered by
    (distance, training index), plus their distances.

    argpartition does the O(n) heavy lifting; index-sorting the candidate
    block before a stable distance sort restores the total order, and rows
    with distance ties crossing the k boundary get an exact redo.
    """
    d2 = _sq_dists(X, core.X)
    n, k = core.X.shape[0], core.k
    if k >= n:
        part = np.tile(np.arange(n), (X.shape[0], 1))
    else:
        part = np.sort(np.argpartition(d2, k - 1, axis=1)[:, :k], axis=1)
    pd = np.take_along_axis(d2, part, axis=1)
    order = np.argsort(pd, axis=1, kind="stable")
    nn = np.take_along_axis(part, order, axis=1)
    nd = np.take_along_axis(pd, order, axis=1)
    if k < n:
        dk = nd[:, -1]
        for r in np.nonzero((d2 <= dk[:, None]).sum(axis=1) > k)[0]:
            cand = np.nonzero(d2[r] <= dk[r])[0]  # already index-ascending
            sub = cand[np.argsort(d2[r, cand], kind="stable")][:k]
            nn[r] = sub
            nd[r] = d2[r, sub]
    return nn, nd


def predict_scores(core: KnnCore, X, tags) -> np.ndarray:
    """Neighbor vote counts per class, aligned with `tags`."""
    X = np.asarray(X, dtype=np.float64)
    nn, _ = _neighbors(core, X)
    pos = {int(t): i for i, t in enumerate(tags)}
    scores = np.zeros((X.shape[0], len(tags)), dtype=np.float64)
    for r in range(X.shape[0]):
        for lab in core.y[nn[r]]:
            scores[r, pos[int(lab)]] += 1.0
    return scores


def predict(core: KnnCore, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    nn, nd = _neighbors(core, X)
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        labs = core.y[nn[r]]
        counts = np.bincount(labs)
        top = counts.max()
        tied = np.nonzero(counts == top)[0]
        if len(tied) == 1:
            out[r] = tied[0]
            continue
        # nearest member of a tied class wins; an exact distance tie
        # between classes falls through to the lowest tag
        best_tag, best_key = None, None
        for t in tied:
            rank = int(np.nonzero(labs == t)[0][0])
            key = (nd[r, rank], int(t))
            if best_key is None or key < best_key:
                best_key, best_tag = key, int(t)
        out[r] = best_tag
    return out


def _sq_dists(A, B):
    aa = (A * A).sum(axis=1)[:, None]
    bb = (B * B).sum(axis=1)[None, :]
    d2 = aa + bb - 2.0 * (A @ B.T)
    return np.maximum(d2, 0.0)
