"""Selective-prediction metric suite: AUROC, AURAC, Youden-thresholded
balanced accuracy, mean token consumption, and seeded bootstrap uncertainty.

Score convention: higher score = predicted less reliable; the incorrect
class (correct == 0) is the positive class throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata


class UndefinedMetricError(RuntimeError):
    """A metric was requested on data where it has no defined value."""


def _as_arrays(scores, correct):
    s = np.asarray(scores, dtype=np.float64)
    c = np.asarray(correct, dtype=np.int64)
    if s.shape != c.shape or s.ndim != 1:
        raise ValueError("scores and correct must be 1-D arrays of equal length")
    return s, c


def _check_two_classes(correct, what):
    n_pos = int(np.sum(correct == 0))
    n_neg = int(np.sum(correct == 1))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"{what} undefined: only one class present")
    return n_pos, n_neg


def auroc(scores, correct) -> float:
    """Probability that a random incorrect sample outscores a random correct
    one, with half credit for ties (Mann-Whitney rank formulation)."""
    s, c = _as_arrays(scores, correct)
    n_pos, n_neg = _check_two_classes(c, "AUROC")
    ranks = rankdata(s)
    pos_rank_sum = float(np.sum(ranks[c == 0]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def aurac(scores, correct) -> float:
    """Mean accuracy of the retained samples over all rejection counts,
    rejecting the most uncertain first. Stable sort keeps tied scores in
    input order."""
    s, c = _as_arrays(scores, correct)
    n = s.size
    if n == 0:
        raise UndefinedMetricError("AURAC undefined on empty input")
    order = np.argsort(s, kind="stable")
    prefix_correct = np.cumsum(c[order])
    accuracies = prefix_correct / np.arange(1, n + 1)
    return float(np.mean(accuracies))


def youden_threshold(scores, correct) -> float:
    """Threshold maximizing TPR - FPR on the given (validation) samples.

    Candidates are midpoints between consecutive distinct scores plus
    -inf/+inf sentinels; the smallest maximizer is returned. Downstream
    prediction rule: unreliable iff score >= threshold.
    """
    s, c = _as_arrays(scores, correct)
    _check_two_classes(c, "Youden threshold")
    uniq = np.unique(s)
    candidates = np.concatenate(([-np.inf], (uniq[:-1] + uniq[1:]) / 2.0, [np.inf]))
    w = (c == 0)
    best_threshold = candidates[0]
    best_j = -np.inf
    for thr in candidates:
        pred = s >= thr
        tpr = float(np.mean(pred[w]))
        fpr = float(np.mean(pred[~w]))
        if tpr - fpr > best_j:
            best_j = tpr - fpr
            best_threshold = float(thr)
    return best_threshold


def balanced_accuracy(scores, correct, threshold: float) -> float:
    """(TPR + TNR) / 2 under the rule: unreliable iff score >= threshold."""
    s, c = _as_arrays(scores, correct)
    _check_two_classes(c, "balanced accuracy")
    pred = s >= threshold
    w = (c == 0)
    tpr = float(np.mean(pred[w]))
    tnr = float(np.mean(~pred[~w]))
    return (tpr + tnr) / 2.0


def n_tok(taus) -> float:
    """Mean number of tokens consumed per uncertainty estimate."""
    arr = np.asarray(taus, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("n_tok requires at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tau missing or non-finite")
    return float(np.mean(arr))


def bootstrap(metric, arrays, B: int = 1000, seed: int = 0, max_attempts: int = 100):
    """Seeded bootstrap of a metric over parallel sample arrays.

    Each resample draws N indices with replacement using an RNG derived
    from (seed, resample index). Resamples on which the metric is
    undefined are redrawn (and counted); if more than half the resamples
    needed a redraw the bootstrap itself is reported as failed.

    Returns (mean, std, n_redrawn).
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    arrays = [np.asarray(a) for a in arrays]
    n = arrays[0].shape[0]
    values = np.empty(B, dtype=np.float64)
    n_redrawn = 0
    for b in range(B):
        rng = np.random.default_rng([seed, b])
        redrawn = False
        for _ in range(max_attempts):
            idx = rng.integers(0, n, size=n)
            try:
                values[b] = metric(*(a[idx] for a in arrays))
                break
            except UndefinedMetricError:
                redrawn = True
        else:
            raise UndefinedMetricError(
                f"bootstrap resample {b} stayed undefined after {max_attempts} redraws"
            )
        if redrawn:
            n_redrawn += 1
    if n_redrawn > B // 2:
        raise UndefinedMetricError(
            f"metric undefined on {n_redrawn}/{B} bootstrap resamples"
        )
    return float(np.mean(values)), float(np.std(values)), n_redrawn


@dataclass
class MetricsReport:
    auroc_mean: float
    auroc_std: float
    aurac_mean: float
    aurac_std: float
    bal_acc_mean: float
    bal_acc_std: float
    n_tok: Optional[float]
    threshold: float
    B: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "auroc": {"mean": self.auroc_mean, "std": self.auroc_std},
            "aurac": {"mean": self.aurac_mean, "std": self.aurac_std},
            "bal_acc": {"mean": self.bal_acc_mean, "std": self.bal_acc_std},
            "n_tok": self.n_tok,
            "threshold": self.threshold,
            "B": self.B,
            "seed": self.seed,
        }


def evaluate(test_scores, test_correct, val_scores, val_correct,
             taus=None, B: int = 1000, seed: int = 0) -> MetricsReport:
    """Full report: threshold fit on validation, metrics + bootstrap on test."""
    threshold = youden_threshold(val_scores, val_correct)
    auroc_mean, auroc_std, _ = bootstrap(auroc, (test_scores, test_correct), B=B, seed=seed)
    aurac_mean, aurac_std, _ = bootstrap(aurac, (test_scores, test_correct), B=B, seed=seed)
    bal = lambda s, c: balanced_accuracy(s, c, threshold)
    bal_mean, bal_std, _ = bootstrap(bal, (test_scores, test_correct), B=B, seed=seed)
    return MetricsReport(
        auroc_mean=auroc_mean,
        auroc_std=auroc_std,
        aurac_mean=aurac_mean,
        aurac_std=aurac_std,
        bal_acc_mean=bal_mean,
        bal_acc_std=bal_std,
        n_tok=None if taus is None else n_tok(taus),
        threshold=threshold,
        B=B,
        seed=seed,
    )
