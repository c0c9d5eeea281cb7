"""Confusion-matrix metrics and cross-validated evaluation.

The positive class is "depressed" (label 1). Zero-denominator cases return
zero and raise a degenerate flag instead of NaN so fold aggregation stays
total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from sklearn.base import clone

from .data import Dataset, filter_min_tweets, kfold_split, select_users
from .errors import InputError

# imported lazily in cross_validate to keep the metrics core dependency-free
# of the model stack


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    accuracy: float
    degenerate: bool


def confusion(preds: Sequence[int], labels: Sequence[int]) -> ConfusionCounts:
    """Count agreement between binary predictions and ground truth."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape:
        raise InputError(
            f"prediction count {preds.shape} does not match label count {labels.shape}")
    if preds.size and (not np.isin(preds, (0, 1)).all()
                       or not np.isin(labels, (0, 1)).all()):
        raise InputError("predictions and labels must be 0 or 1")
    return ConfusionCounts(
        tp=int(np.sum((preds == 1) & (labels == 1))),
        fp=int(np.sum((preds == 1) & (labels == 0))),
        fn=int(np.sum((preds == 0) & (labels == 1))),
        tn=int(np.sum((preds == 0) & (labels == 0))),
    )


def prf1_accuracy(counts: ConfusionCounts) -> Metrics:
    """Precision, recall, F1 and accuracy from confusion counts."""
    if counts.total == 0:
        raise InputError("empty confusion counts")
    degenerate = False
    if counts.tp + counts.fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0.0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    accuracy = (counts.tp + counts.tn) / counts.total
    return Metrics(counts=counts, precision=precision, recall=recall,
                   f1=f1, accuracy=accuracy, degenerate=degenerate)


@dataclass
class CrossValReport:
    folds: List[Metrics]
    mean: Dict[str, float]
    std: Dict[str, float]

    def to_dict(self) -> dict:
        return {
            "folds": [
                {
                    "precision": m.precision, "recall": m.recall,
                    "f1": m.f1, "accuracy": m.accuracy,
                    "tp": m.counts.tp, "fp": m.counts.fp,
                    "fn": m.counts.fn, "tn": m.counts.tn,
                }
                for m in self.folds
            ],
            "mean": self.mean,
            "std": self.std,
        }


def cross_validate(dataset: Dataset, estimator, k: int = 5,
                   seed: int = 0, min_tweets: int = 10) -> CrossValReport:
    """k-fold evaluation of an unfitted estimator.

    Each fold re-clones the estimator and fits it on the training split
    only, so clustering hyperparameter searches never see test users.
    """
    dataset = filter_min_tweets(dataset, min_tweets)
    splits = kfold_split(dataset, k=k, seed=seed)
    folds: List[Metrics] = []
    for split in splits:
        # canonical id order makes fold metrics independent of the
        # dataset's insertion order
        train_users = sorted(select_users(dataset, split.train_ids),
                             key=lambda u: u.user_id)
        test_users = sorted(select_users(dataset, split.test_ids),
                            key=lambda u: u.user_id)
        est = clone(estimator)
        est.fit(train_users)
        preds = est.predict(test_users)
        labels = [u.label for u in test_users]
        folds.append(prf1_accuracy(confusion(preds, labels)))
    names = ("precision", "recall", "f1", "accuracy")
    mean = {n: float(np.mean([getattr(m, n) for m in folds])) for n in names}
    std = {n: float(np.std([getattr(m, n) for m in folds])) for n in names}
    return CrossValReport(folds=folds, mean=mean, std=std)
