"""Independent brute-force oracles used by the test suite.

Each oracle recomputes a quantity by the most literal method available
(high-precision products, exhaustive enumeration, pairwise counting,
second moments) and deliberately shares no code with the library paths it
checks.
"""

from __future__ import annotations

import numpy as np
from mpmath import mp


def product_alpha_bar(betas, t: int) -> float:
    """Sequential high-precision product of (1 - beta) up to step t."""
    with mp.workdps(60):
        acc = mp.mpf(1)
        for beta in betas[:t]:
            acc *= mp.mpf(1) - mp.mpf(float(beta))
        return float(acc)


def auroc_pairwise(scores, labels) -> float:
    """Count every (normal, anomalous) pair; ties earn half credit."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def roc_exhaustive(scores, labels):
    """Operating points for every candidate threshold, one per unique score.

    Returns (thresholds, fpr, tpr) sorted from the strictest threshold
    (+inf, nothing flagged) to the loosest (everything flagged).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    npos = int((labels == 1).sum())
    nneg = int((labels == 0).sum())
    thresholds = [np.inf] + sorted(set(scores.tolist()), reverse=True)
    fpr, tpr = [], []
    for thr in thresholds:
        flagged = scores >= thr
        tpr.append(float((flagged & (labels == 1)).sum()) / npos)
        fpr.append(float((flagged & (labels == 0)).sum()) / nneg)
    return np.asarray(thresholds), np.asarray(fpr), np.asarray(tpr)


def ap_enumeration(scores, labels) -> float:
    """Average precision by walking the full precision-recall curve.

    Ranks by descending score with input order breaking ties (the same
    documented tie rule the library uses).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    npos = int((labels == 1).sum())
    tp = 0
    ap = 0.0
    prev_recall = 0.0
    for rank, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            tp += 1
            recall = tp / npos
            precision = tp / rank
            ap += (recall - prev_recall) * precision
            prev_recall = recall
    return ap


def lag1_autocorr(field: np.ndarray) -> float:
    """Average of horizontal and vertical lag-1 Pearson correlations."""
    h = np.corrcoef(field[:, :-1].ravel(), field[:, 1:].ravel())[0, 1]
    v = np.corrcoef(field[:-1, :].ravel(), field[1:, :].ravel())[0, 1]
    return 0.5 * (h + v)


def fitted_ellipse_axes(region: np.ndarray) -> tuple[float, float]:
    """Semi-axes (row, col) of a filled axis-aligned ellipse from moments.

    For a solid ellipse the coordinate variance along an axis equals
    (semi-axis)^2 / 4, so the fit is 2 * std.
    """
    rows, cols = np.nonzero(region)
    return 2.0 * float(np.std(rows)), 2.0 * float(np.std(cols))


def ssim_constant_images(a_val: float, b_val: float, c1: float) -> float:
    """Closed-form SSIM of two constant images: the luminance factor only."""
    return (2.0 * a_val * b_val + c1) / (a_val ** 2 + b_val ** 2 + c1)
