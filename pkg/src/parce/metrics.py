"""Separation metrics between score samples.

Throughout, ``pos`` is the group to detect (misclassified, OOD, unfamiliar)
and is expected to receive LOWER competency than ``neg``.
"""

import math

import numpy as np

from .errors import DomainError


def _sample(a, name):
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise DomainError(f"{name} sample set is empty")
    return a


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(_sample(a, "first"))
    b = np.sort(_sample(b, "second"))
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def auroc(pos, neg):
    """P(pos < neg) + 0.5 P(pos == neg), the Mann-Whitney form."""
    pos = _sample(pos, "positive")
    neg = np.sort(_sample(neg, "negative"))
    right = np.searchsorted(neg, pos, side="right")
    left = np.searchsorted(neg, pos, side="left")
    greater = neg.size - right
    ties = right - left
    return float((greater.sum() + 0.5 * ties.sum()) / (pos.size * neg.size))


def fpr_at_tpr(pos, neg, tpr_target=0.95):
    """Fraction of ``neg`` at or below the smallest threshold catching ``tpr_target`` of ``pos``."""
    if not 0 < tpr_target <= 1:
        raise DomainError("tpr_target must lie in (0, 1]")
    pos = np.sort(_sample(pos, "positive"))
    neg = _sample(neg, "negative")
    k = max(1, math.ceil(tpr_target * pos.size - 1e-9))
    thr = pos[k - 1]
    return float(np.mean(neg <= thr))


def summarize(pos, neg):
    return {"ks": ks_distance(pos, neg), "auroc": auroc(pos, neg), "fpr95": fpr_at_tpr(pos, neg)}
