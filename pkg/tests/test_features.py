import math
from collections import Counter
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvmsig.errors import NumericError, ValidationError
from nvmsig.features import (
    apply_standardizer,
    bin_feature,
    fit_standardizer,
    mrmr_select,
    mutual_information,
    nca_gradient,
    nca_objective,
    nca_select,
)


def bin_oracle(values, bins):
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0] * len(values)
    out = []
    for v in values:
        b = math.floor((v - lo) / (hi - lo) * bins)
        out.append(min(max(b, 0), bins - 1))
    return out


def mi_oracle(a_vals, b_vals):
    # dict-counting MI over two discrete sequences, scalar arithmetic only
    n = len(a_vals)
    ca, cb = Counter(a_vals), Counter(b_vals)
    cab = Counter(zip(a_vals, b_vals))
    s = 0.0
    for (av, bv), c in cab.items():
        s += (c / n) * math.log((c / n) / ((ca[av] / n) * (cb[bv] / n)))
    return s


def toy(seed, n=24, d=4, classes=3, informative=True):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, classes, size=n)
    X = rng.normal(size=(n, d))
    if informative:
        X[:, 0] += 2.5 * y
    return SimpleNamespace(X=X, y=y)


# ---------------- standardizer ----------------

def test_standardizer_zero_mean_unit_std():
    X = np.random.default_rng(0).normal(3.0, 2.0, size=(50, 5))
    stats = fit_standardizer(X)
    Z = apply_standardizer(stats, X)
    assert np.allclose(Z.mean(0), 0.0, atol=1e-12)
    assert np.allclose(Z.std(0), 1.0, atol=1e-12)


def test_standardizer_dead_feature_maps_to_zero():
    X = np.column_stack([np.arange(6.0), np.full(6, 4.2)])
    Z = apply_standardizer(fit_standardizer(X), X)
    assert np.all(Z[:, 1] == 0.0)


def test_standardizer_arity_mismatch():
    stats = fit_standardizer(np.ones((3, 2)))
    with pytest.raises(ValidationError):
        apply_standardizer(stats, np.ones((3, 5)))


# ---------------- binning and MI ----------------

@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60),
       st.integers(1, 20))
def test_bin_feature_matches_oracle(values, bins):
    got = bin_feature(np.array(values), bins)
    assert got.tolist() == bin_oracle(values, bins)


def test_mi_matches_bruteforce_on_50_instances():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(5, 80))
        f = rng.normal(size=n) * rng.uniform(0.1, 50)
        y = rng.integers(0, int(rng.integers(2, 5)), size=n)
        got = mutual_information(f, y, bins=16)
        want = mi_oracle(bin_oracle(f.tolist(), 16), y.tolist())
        assert got == pytest.approx(want, abs=1e-12)


def test_mi_symmetry():
    rng = np.random.default_rng(7)
    a = rng.integers(0, 4, size=200)
    b = rng.integers(0, 3, size=200)
    # integer-valued inputs with bins >= value count make binning an identity
    assert mutual_information(a.astype(float), b, bins=4) == pytest.approx(
        mutual_information(b.astype(float), a, bins=3), abs=1e-12)


def test_mi_bounded_by_entropies():
    rng = np.random.default_rng(1)
    for _ in range(20):
        f = rng.normal(size=100)
        y = rng.integers(0, 3, size=100)
        mi = mutual_information(f, y)
        hy = mi_oracle(y.tolist(), y.tolist())
        hf = mi_oracle(bin_oracle(f.tolist(), 16), bin_oracle(f.tolist(), 16))
        assert mi <= min(hf, hy) + 1e-12
        assert mi >= -1e-12


def test_mi_deterministic_relation_equals_entropy():
    y = np.repeat([0, 1, 2], 30)
    f = y.astype(float)
    assert mutual_information(f, y, bins=3) == pytest.approx(
        mi_oracle(y.tolist(), y.tolist()), abs=1e-12)


def test_mi_constant_feature_is_zero():
    assert mutual_information(np.full(40, 3.3), np.arange(40) % 2) == 0.0


# ---------------- mrmr ----------------

def mrmr_oracle(X, y, k, bins):
    d = X.shape[1]
    cols = [bin_oracle(X[:, j].tolist(), bins) for j in range(d)]
    rel = [mi_oracle(cols[j], y.tolist()) for j in range(d)]
    chosen = []
    while len(chosen) < k:
        best, best_score = None, None
        for j in range(d):
            if j in chosen:
                continue
            red = sum(mi_oracle(cols[j], cols[s]) for s in chosen)
            score = rel[j] - (red / len(chosen) if chosen else 0.0)
            if best is None or score > best_score + 1e-15:
                best, best_score = j, score
        chosen.append(best)
    return chosen


def test_mrmr_matches_greedy_oracle():
    rng = np.random.default_rng(3)
    for seed in range(8):
        ds = toy(seed, n=40, d=6)
        ds.X[:, 3] = ds.X[:, 0] + 0.01 * rng.normal(size=40)  # redundant copy
        got = mrmr_select(ds, k=6).indices.tolist()
        assert got == mrmr_oracle(ds.X, ds.y, 6, 16)


def test_mrmr_prefix_consistency():
    ds = toy(5, n=60, d=8)
    full = mrmr_select(ds, k=8).indices.tolist()
    for k in range(1, 9):
        assert mrmr_select(ds, k=k).indices.tolist() == full[:k]


def test_mrmr_tie_prefers_lowest_index():
    y = np.repeat([0, 1], 20)
    col = np.concatenate([np.zeros(20), np.ones(20)])
    X = np.column_stack([col, col, col])
    got = mrmr_select(SimpleNamespace(X=X, y=y), k=1).indices
    assert got.tolist() == [0]


def test_mrmr_k_bounds():
    ds = toy(0, d=4)
    with pytest.raises(ValidationError):
        mrmr_select(ds, k=5)
    with pytest.raises(ValidationError):
        mrmr_select(ds, k=0)


# ---------------- nca ----------------

@pytest.mark.parametrize("seed", range(10))
def test_nca_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(8, 20)), int(rng.integers(2, 5))
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, size=n)
    if len(np.unique(y)) < 2:
        y[0], y[1] = 0, 1
    w = rng.uniform(0.5, 1.5, size=d)
    g = nca_gradient(w, X, y)
    h = 1e-6
    fd = np.empty(d)
    for m in range(d):
        wp, wm = w.copy(), w.copy()
        wp[m] += h
        wm[m] -= h
        fd[m] = (nca_objective(wp, X, y) - nca_objective(wm, X, y)) / (2 * h)
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-8)


def test_nca_objective_nondecreasing_small_lr():
    for seed in range(4):
        ds = toy(seed, n=30, d=3)
        w = np.ones(3)
        prev = nca_objective(w, ds.X, ds.y)
        for _ in range(50):
            w = w + 1e-3 * nca_gradient(w, ds.X, ds.y)
            cur = nca_objective(w, ds.X, ds.y)
            assert cur >= prev - 1e-12
            prev = cur


def test_nca_ranks_informative_feature_first():
    ds = toy(11, n=45, d=5)
    ds.X = apply_standardizer(fit_standardizer(ds.X), ds.X)
    ranking = nca_select(ds, k=5, iters=150, learning_rate=0.05)
    assert ranking.indices[0] == 0
    assert ranking.method == "nca"
    assert np.all(np.diff(ranking.scores) <= 1e-12)


def test_nca_needs_two_classes():
    ds = SimpleNamespace(X=np.random.default_rng(0).normal(size=(10, 3)),
                         y=np.zeros(10, dtype=int))
    with pytest.raises(ValidationError):
        nca_select(ds, k=2)
    with pytest.raises(ValidationError):
        mrmr_select(ds, k=2)


def test_nca_nonfinite_gradient_aborts():
    ds = toy(2, n=20, d=3)
    with pytest.raises(NumericError, match="iteration"):
        nca_select(ds, k=2, iters=5, learning_rate=1e200)


def test_nca_subsample_caps_fit_size():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(1600, 3))
    y = rng.integers(0, 2, size=1600)
    X[:, 1] += 3.0 * y
    ranking = nca_select(SimpleNamespace(X=X, y=y), k=3, iters=5,
                         learning_rate=0.01, subsample=True)
    assert ranking.indices[0] == 1
    assert len(ranking) == 3
