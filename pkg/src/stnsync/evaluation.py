"""Leave-one-out evaluation, confusion matrices and CSV report tables."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateError, LabelError
from .features import FeatureMatrix, pca_fit
from .signal_io import CLASSES

CHANCE_RATE_PCT = 100.0 / len(CLASSES)


@dataclass
class ConfusionMatrix:
    """Raw counts; rows are ground truth, columns are predictions."""

    counts: np.ndarray
    class_order: Tuple[str, ...] = CLASSES

    @classmethod
    def from_predictions(cls, truth: Sequence[str], pred: Sequence[str],
                         class_order: Sequence[str] = CLASSES) -> "ConfusionMatrix":
        idx = {c: i for i, c in enumerate(class_order)}
        counts = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
        for t, p in zip(truth, pred):
            counts[idx[t], idx[p]] += 1
        return cls(counts, tuple(class_order))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * float(np.trace(self.counts)) / self.total

    def normalized(self) -> np.ndarray:
        return confusion_normalize(self)


def confusion_normalize(cm: ConfusionMatrix) -> np.ndarray:
    """Row-normalise counts to percentages (each row sums to 100)."""
    counts = np.asarray(cm.counts, dtype=np.float64)
    sums = counts.sum(axis=1)
    for c, s in zip(cm.class_order, sums):
        if s <= 0:
            raise DegenerateError(f"class {c} has no trials; its confusion row cannot be normalised")
    return 100.0 * counts / sums[:, None]


@dataclass
class EvalReport:
    accuracy_pct: float
    confusion: ConfusionMatrix
    predictions: List[str]
    truth: List[str]
    chance_rate_pct: float = CHANCE_RATE_PCT
    meta: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "accuracy_pct": self.accuracy_pct,
            "chance_rate_pct": self.chance_rate_pct,
            "class_order": list(self.confusion.class_order),
            "confusion_counts": self.confusion.counts.tolist(),
            "confusion_pct": confusion_normalize(self.confusion).tolist(),
            "n_trials": len(self.truth),
            "truth": list(self.truth),
            "predictions": list(self.predictions),
            **self.meta,
        }


def pca_builder(fraction: float = 0.95):
    """Features builder fitting PCA on each training fold."""
    def build(train_rows):
        return pca_fit(train_rows, fraction).transform
    return build


def check_folds(labels: Sequence[str]):
    if len(labels) < 2:
        raise DegenerateError("LOOCV needs at least 2 trials")
    counts = Counter(labels)
    thin = sorted(c for c, n in counts.items() if n < 2)
    if thin:
        raise DegenerateError(f"classes {thin} have a single trial; leaving it out empties the class")


def loocv(dataset: FeatureMatrix, trainer: Callable, features_builder: Optional[Callable] = None,
          class_order: Optional[Sequence[str]] = None) -> EvalReport:
    """Leave-one-out cross-validation.

    For every trial t, ``features_builder(train_rows)`` returns a transform
    (e.g. a PCA fitted on the fold), ``trainer(train_rows, train_labels)``
    returns a model with ``predict``, and trial t is predicted.
    """
    labels = list(dataset.labels)
    check_folds(labels)
    if class_order is None:
        class_order = [c for c in CLASSES if c in set(labels)]
    n = len(labels)
    preds = []
    for t in range(n):
        train = np.arange(n) != t
        X = dataset.rows[train]
        z = dataset.rows[t:t + 1]
        if features_builder is not None:
            transform = features_builder(X)
            X, z = transform(X), transform(z)
        model = trainer(X, [labels[i] for i in np.flatnonzero(train)])
        preds.append(model.predict(z)[0])
    cm = ConfusionMatrix.from_predictions(labels, preds, class_order)
    return EvalReport(cm.accuracy_pct, cm, preds, labels)


@dataclass
class PairSweep:
    accuracy_pct: np.ndarray          # 3 x 3, [left][right]
    selected: Tuple[int, int]
    left_names: Tuple[str, ...]
    right_names: Tuple[str, ...]
    reports: Dict[Tuple[int, int], EvalReport] = field(default_factory=dict, repr=False)

    @property
    def mean_pct(self) -> float:
        return float(np.mean(self.accuracy_pct))

    @property
    def selected_pct(self) -> float:
        return float(self.accuracy_pct[self.selected])

    @property
    def best_pct(self) -> float:
        return float(self.accuracy_pct.max())

    def to_dict(self) -> Dict:
        return {
            "pairs": [
                {"left": l, "right": r, "name": f"{self.left_names[l]}/{self.right_names[r]}",
                 "accuracy_pct": float(self.accuracy_pct[l, r]),
                 "sync_selected": (l, r) == tuple(self.selected)}
                for l in range(3) for r in range(3)
            ],
            "mean_pct": self.mean_pct,
            "selected_pct": self.selected_pct,
            "chance_rate_pct": CHANCE_RATE_PCT,
        }


def evaluate_pair(prepared, left: int, right: int, trainer, paper_mode: bool = False,
                  pca_fraction: float = 0.95) -> EvalReport:
    fm = prepared.pair_features(left, right)
    if paper_mode:
        model = pca_fit(fm.rows, pca_fraction)
        fm = FeatureMatrix(model.transform(fm.rows), fm.labels, fm.provenance)
        report = loocv(fm, trainer, None)
    else:
        report = loocv(fm, trainer, pca_builder(pca_fraction))
    report.meta.update({"pair": [left, right], "pair_names": fm.provenance["pair_names"]})
    return report


def per_pair_sweep(prepared, trainer, paper_mode: bool = False, pca_fraction: float = 0.95) -> PairSweep:
    """LOOCV accuracy for all nine left x right pairs, marking the sync-selected one."""
    acc = np.zeros((3, 3))
    reports = {}
    for l in range(3):
        for r in range(3):
            rep = evaluate_pair(prepared, l, r, trainer, paper_mode, pca_fraction)
            acc[l, r] = rep.accuracy_pct
            reports[(l, r)] = rep
    b = prepared.bipolar
    return PairSweep(acc, tuple(prepared.sync.selected), tuple(b.left_names), tuple(b.right_names), reports)


# --- report tables -----------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


def _csv(rows: List[List]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def table1_csv(accuracy: Dict[str, Dict[str, float]], classifiers: Sequence[str]) -> str:
    """Rows: configuration ("Without Sync", "FFT Sync", ...); columns: classifier."""
    configs = []
    for per_cfg in accuracy.values():
        for name in per_cfg:
            if name not in configs:
                configs.append(name)
    rows = [["configuration"] + list(classifiers)]
    for name in configs:
        rows.append([name] + [_fmt(accuracy[c][name]) if name in accuracy[c] else "" for c in classifiers])
    return _csv(rows)


def table2_csv(normalized: np.ndarray, class_order: Sequence[str]) -> str:
    """Row-normalised confusion matrix; rows truth, columns prediction."""
    rows = [["truth\\predicted"] + list(class_order)]
    for c, row in zip(class_order, normalized):
        rows.append([c] + [_fmt(v) for v in row])
    return _csv(rows)


def fig2_csv(sweep: PairSweep) -> str:
    """Bar data: one row per pair, then the mean and chance lines."""
    rows = [["pair", "left", "right", "accuracy_pct", "sync_selected"]]
    for p in sweep.to_dict()["pairs"]:
        rows.append([p["name"], p["left"], p["right"], _fmt(p["accuracy_pct"]), int(p["sync_selected"])])
    rows.append(["mean", "", "", _fmt(sweep.mean_pct), ""])
    rows.append(["chance", "", "", _fmt(CHANCE_RATE_PCT), ""])
    return _csv(rows)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_tables(out_dir, tables: Dict[str, str]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out / name).write_text(text)
