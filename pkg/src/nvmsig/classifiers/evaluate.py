"""Held-out evaluation and stratified cross-validation."""

import io
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from . import model as _model


@dataclass
class EvalReport:
    kind: str
    tags: np.ndarray          # confusion axis, sorted
    class_names: dict
    confusion: np.ndarray     # rows = true class, columns = predicted
    accuracy: float
    tpr: np.ndarray
    fnr: np.ndarray
    n_test: int
    train_time_s: float
    selection_time_s: float
    infer_time_s: float
    infer_time_per_sample_s: float

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"model: {self.kind}\n")
        out.write(f"test samples: {self.n_test}\n")
        out.write(f"accuracy: {self.accuracy:.4f}\n")
        out.write(f"train time [s]: {self.train_time_s:.4f}\n")
        out.write(f"selection time [s]: {self.selection_time_s:.4f}\n")
        out.write(f"inference time [s]: {self.infer_time_s:.4f} total, "
                  f"{self.infer_time_per_sample_s:.6f} per sample\n")
        out.write("confusion (rows = true):\n")
        width = max(5, *(len(str(int(t))) + 1 for t in self.tags))
        out.write(" " * 7 + "".join(f"{int(t):>{width}}" for t in self.tags) + "\n")
        for i, t in enumerate(self.tags):
            row = "".join(f"{int(c):>{width}}" for c in self.confusion[i])
            out.write(f"{int(t):>6} {row}\n")
        out.write("per-class rates:\n")
        for i, t in enumerate(self.tags):
            name = self.class_names.get(int(t), f"class{int(t)}")
            out.write(f"  {int(t)} {name}: tpr {self.tpr[i]:.4f} "
                      f"fnr {self.fnr[i]:.4f}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("# confusion\n")
        out.write("true\\pred," + ",".join(str(int(t)) for t in self.tags) + "\n")
        for i, t in enumerate(self.tags):
            out.write(f"{int(t)}," + ",".join(str(int(c)) for c in self.confusion[i]) + "\n")
        out.write("# metrics\n")
        out.write("metric,value\n")
        out.write(f"kind,{self.kind}\n")
        out.write(f"n_test,{self.n_test}\n")
        out.write(f"accuracy,{self.accuracy:.6f}\n")
        out.write(f"train_time_s,{self.train_time_s:.4f}\n")
        out.write(f"selection_time_s,{self.selection_time_s:.4f}\n")
        out.write(f"infer_time_s,{self.infer_time_s:.4f}\n")
        out.write(f"infer_time_per_sample_s,{self.infer_time_per_sample_s:.6f}\n")
        for i, t in enumerate(self.tags):
            out.write(f"tpr_{int(t)},{self.tpr[i]:.6f}\n")
            out.write(f"fnr_{int(t)},{self.fnr[i]:.6f}\n")
        return out.getvalue()


def evaluate(model, test) -> EvalReport:
    """Score a trained model on a labeled dataset.

    The confusion axis covers model and test classes both, so a test class
    the model has never seen still shows up as a row of errors.
    """
    y_true = np.asarray(test.y, dtype=np.int64)
    if y_true.size == 0:
        raise ValidationError("test set is empty")
    t0 = time.perf_counter()
    y_pred = _model.predict(model, test.X)
    infer = time.perf_counter() - t0
    tags = np.unique(np.concatenate([model.tags, y_true]))
    pos = {int(t): i for i, t in enumerate(tags)}
    L = len(tags)
    confusion = np.zeros((L, L), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[pos[int(t)], pos[int(p)]] += 1
    row = confusion.sum(axis=1)
    diag = np.diag(confusion).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        tpr = np.where(row > 0, diag / row, 0.0)
    fnr = np.where(row > 0, 1.0 - tpr, 0.0)
    names = dict(getattr(test, "class_names", {}) or {})
    names.update(model.class_names)
    return EvalReport(
        kind=model.kind, tags=tags, class_names=names, confusion=confusion,
        accuracy=float((y_pred == y_true).mean()), tpr=tpr, fnr=fnr,
        n_test=int(y_true.size), train_time_s=model.train_time_s,
        selection_time_s=model.selection_time_s, infer_time_s=infer,
        infer_time_per_sample_s=infer / y_true.size)


@dataclass
class CrossValResult:
    kind: str
    folds: int
    accuracies: np.ndarray
    mean_accuracy: float
    stdev_accuracy: float


_TRAINERS = {"knn": _model.train_knn, "tree": _model.train_tree,
             "svm": _model.train_svm}


def fold_assignments(y, folds: int, seed: int) -> np.ndarray:
    """Stratified fold ids: per-class seeded shuffle, then a round-robin
    that keeps counting across classes so folds stay balanced and
    folds == n degenerates to leave-one-out."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    cursor = 0
    for tag in np.unique(y):
        rows = np.nonzero(y == tag)[0]
        rows = rows[rng.permutation(rows.size)]
        for r in rows:
            fold_of[r] = cursor % folds
            cursor += 1
    return fold_of


def cross_validate(kind: str, train, folds: int = 8, seed: int = 0,
                   ranking_fn=None, **hyperparams) -> CrossValResult:
    """Refits the full pipeline on each fold's complement.

    `ranking_fn`, when given, maps a training subset to a FeatureRanking;
    it runs inside each fold so selection never sees held-out samples.
    """
    if kind not in _TRAINERS:
        raise ValidationError(f"unknown classifier kind '{kind}'")
    y = np.asarray(train.y)
    n = y.size
    if not 2 <= folds <= n:
        raise ValidationError(f"folds must be in [2, {n}]")
    fold_of = fold_assignments(y, folds, seed)
    trainer = _TRAINERS[kind]
    X = np.asarray(train.X, dtype=np.float64)
    names = dict(getattr(train, "class_names", {}) or {})
    accs = np.empty(folds)
    for f in range(folds):
        held = fold_of == f
        sub = _Subset(X[~held], y[~held], names)
        if ranking_fn is not None:
            m = trainer(sub, ranking=ranking_fn(sub), **hyperparams)
        else:
            m = trainer(sub, **hyperparams)
        pred = _model.predict(m, X[held])
        accs[f] = float((pred == y[held]).mean())
    return CrossValResult(kind, folds, accs, float(accs.mean()),
                          float(accs.std()))


class _Subset:
    def __init__(self, X, y, class_names):
        self.X = X
        self.y = y
        self.class_names = class_names
