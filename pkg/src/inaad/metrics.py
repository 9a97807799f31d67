"""Similarity and detection metrics: SSIM, ROC/AUROC, average precision.

Scores follow the convention "higher score = more anomalous"; labels are
0 for in-distribution (normal) and 1 for out-of-distribution (anomalous).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

__all__ = [
    "SsimParams",
    "ssim",
    "LabeledScores",
    "RocCurve",
    "roc_curve",
    "auroc",
    "average_precision",
    "GroupResult",
    "evaluate_groups",
]

# Dynamic range of images living in [-1, 1].
_DYNAMIC_RANGE = 2.0


@dataclass(frozen=True)
class SsimParams:
    """Windowed-SSIM configuration.

    The default is a 7x7 uniform window with the customary stabilizers
    C1 = (0.01 L)^2 and C2 = (0.03 L)^2 for dynamic range L = 2. Setting
    ``gaussian_window=True`` switches to an 11x11 Gaussian window
    (sigma 1.5) for sensitivity checks.
    """

    window: int = 7
    c1: float = (0.01 * _DYNAMIC_RANGE) ** 2
    c2: float = (0.03 * _DYNAMIC_RANGE) ** 2
    gaussian_window: bool = False
    gaussian_sigma: float = 1.5

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.c1 <= 0.0 or self.c2 <= 0.0:
            raise ValueError("stabilization constants must be positive")


def _window_means(img: np.ndarray, params: SsimParams) -> np.ndarray:
    """Per-window mean over all fully-inside windows."""
    k = params.window // 2
    if params.gaussian_window:
        ax = np.arange(params.window) - k
        g = np.exp(-(ax ** 2) / (2.0 * params.gaussian_sigma ** 2))
        kernel = np.outer(g, g)
        kernel /= kernel.sum()
        out = ndimage.correlate(img, kernel, mode="constant")
    else:
        out = ndimage.uniform_filter(img, size=params.window, mode="constant")
    return out[k:-k, k:-k]


def ssim(a: np.ndarray, b: np.ndarray,
         params: SsimParams = SsimParams()) -> float:
    """Mean local structural similarity between two images in [-1, 1].

    Local luminance/contrast/structure statistics are computed over every
    window fully inside the frame and combined with the standard two-term
    formula; the result lies in [-1, 1] and equals 1 iff a == b.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("ssim expects 2-D images")
    if min(a.shape) < params.window:
        raise ValueError(
            f"image {a.shape} smaller than the {params.window}x{params.window} window"
        )

    mu_a = _window_means(a, params)
    mu_b = _window_means(b, params)
    mean_aa = _window_means(a * a, params)
    mean_bb = _window_means(b * b, params)
    mean_ab = _window_means(a * b, params)

    var_a = mean_aa - mu_a * mu_a
    var_b = mean_bb - mu_b * mu_b
    cov_ab = mean_ab - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + params.c1) * (2.0 * cov_ab + params.c2)
    den = (mu_a * mu_a + mu_b * mu_b + params.c1) * (var_a + var_b + params.c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class LabeledScores:
    """Anomaly scores with binary labels and optional group tags."""

    scores: np.ndarray
    labels: np.ndarray
    groups: tuple[str, ...] | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if scores.ndim != 1 or scores.shape != labels.shape:
            raise ValueError("scores and labels must be equal-length 1-D arrays")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 (normal) or 1 (anomalous)")
        if self.groups is not None and len(self.groups) != scores.size:
            raise ValueError("groups must match scores in length")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))

    def _require_both_classes(self) -> None:
        npos = int(self.labels.sum())
        if npos == 0 or npos == self.labels.size:
            raise ValueError("need at least one sample of each class")


@dataclass(frozen=True)
class RocCurve:
    """ROC staircase: point i is the operating point "score >= thresholds[i]".

    The leading point is (fpr=0, tpr=0) with threshold +inf; the final point
    is (1, 1) at the lowest observed score.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores: LabeledScores) -> RocCurve:
    """ROC operating points at every unique score, ties grouped."""
    scores._require_both_classes()
    order = np.argsort(-scores.scores, kind="stable")
    s = scores.scores[order]
    y = scores.labels[order]

    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    # Keep only the last index of each tie block: thresholds at unique scores.
    last = np.nonzero(np.diff(s, append=-np.inf))[0]
    npos = tp[-1]
    nneg = fp[-1]
    thresholds = np.concatenate(([np.inf], s[last]))
    tpr = np.concatenate(([0.0], tp[last] / npos))
    fpr = np.concatenate(([0.0], fp[last] / nneg))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr)


def auroc(scores: LabeledScores) -> float:
    """Probability a random anomalous sample outscores a random normal one.

    Ties count one half (rank-statistic convention); equals the trapezoidal
    area under the ROC staircase.
    """
    scores._require_both_classes()
    y = scores.labels
    ranks = rankdata(scores.scores, method="average")
    npos = int(y.sum())
    nneg = y.size - npos
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - npos * (npos + 1) / 2.0) / (npos * nneg))


def average_precision(scores: LabeledScores) -> float:
    """Recall-increment-weighted precision over positives.

    Samples are ranked by descending score; equal scores keep their input
    order (stable sort), which is the documented tie rule.
    """
    scores._require_both_classes()
    order = np.argsort(-scores.scores, kind="stable")
    y = scores.labels[order]
    tp = np.cumsum(y)
    ranks = np.arange(1, y.size + 1)
    precision = tp / ranks
    return float(precision[y == 1].sum() / tp[-1])


@dataclass(frozen=True)
class GroupResult:
    group: str
    n: int
    auroc: float
    ap: float


def evaluate_groups(scores: LabeledScores) -> list[GroupResult]:
    """Per-anomaly-group AUROC/AP: each group versus all normals, plus "All".

    Normal samples must carry the group tag "normal". Empty groups are
    skipped with a warning.
    """
    if scores.groups is None:
        raise ValueError("evaluate_groups requires group tags")
    scores._require_both_classes()
    labels = scores.labels
    groups = np.asarray(scores.groups)
    if not np.all((labels == 1) == (groups != "normal")):
        raise ValueError('anomalous rows must carry a non-"normal" group tag')

    id_mask = labels == 0
    rows: list[GroupResult] = []
    seen: list[str] = []
    for g in groups:
        if g != "normal" and g not in seen:
            seen.append(g)
    for g in seen + ["All"]:
        member = (groups != "normal") if g == "All" else (groups == g)
        n = int(member.sum())
        if n == 0:
            warnings.warn(f"group {g!r} has no members; skipped")
            continue
        select = id_mask | member
        subset = LabeledScores(scores.scores[select], labels[select])
        rows.append(GroupResult(group=g, n=n,
                                auroc=auroc(subset),
                                ap=average_precision(subset)))
    return rows
