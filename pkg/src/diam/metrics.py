"""Precision, recall, F1 and ROC AUC with the illicit class as positive."""

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    auc: float = float("nan")
    precision_defined: bool = True
    recall_defined: bool = True

    def as_dict(self):
        return asdict(self)

    def format(self):
        flags = []
        if not self.precision_defined:
            flags.append("precision undefined (no predicted positives)")
        if not self.recall_defined:
            flags.append("recall undefined (no actual positives)")
        lines = [f"precision {self.precision:.4f}", f"recall    {self.recall:.4f}",
                 f"f1        {self.f1:.4f}", f"auc       {self.auc:.4f}",
                 f"tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn}"]
        return "\n".join(lines + flags)

    def write_csv(self, path):
        row = self.as_dict()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            writer.writeheader()
            writer.writerow(row)


def _check(probs, labels):
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if len(probs) != len(labels):
        raise ValueError(f"{len(probs)} scores but {len(labels)} labels")
    if len(probs) == 0:
        raise ValueError("no samples to evaluate")
    return probs, labels.astype(np.int64)


def classification_metrics(probs, labels, threshold=0.5):
    probs, labels = _check(probs, labels)
    pred = probs >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    p_def, r_def = tp + fp > 0, tp + fn > 0
    precision = tp / (tp + fp) if p_def else 0.0
    recall = tp / (tp + fn) if r_def else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(precision, recall, f1, tp, fp, tn, fn,
                      precision_defined=p_def, recall_defined=r_def)


def auc(scores, labels):
    """Mann-Whitney AUC: P(score of random positive > random negative), ties count 1/2."""
    scores, labels = _check(scores, labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)  # average ranks resolve ties
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate(probs, labels, threshold=0.5):
    report = classification_metrics(probs, labels, threshold)
    labels = np.asarray(labels)
    score = auc(probs, labels) if 0 < labels.sum() < len(labels) else float("nan")
    return EvalReport(**{**report.as_dict(), "auc": score})
