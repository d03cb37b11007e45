"""Salient-object-detection evaluation scores.

All functions take a saliency map in [0, 1] and a boolean ground-truth
mask of the same shape.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .raster import check_same_shape

BETA2 = 0.3
N_THRESHOLDS = 256


class EmptyGroundTruthError(ValueError):
    pass


@dataclass(frozen=True)
class PRCurve:
    thresholds: np.ndarray  # 0..255
    precision: np.ndarray
    recall: np.ndarray


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    max_f: float
    weighted_f: float
    s_measure: float
    e_measure: float

    def as_dict(self) -> dict:
        return asdict(self)


def _prepare(s, g):
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=bool)
    check_same_shape(s, g, "saliency map and ground truth")
    return s, g


def mae(s, g) -> float:
    s, g = _prepare(s, g)
    return float(np.mean(np.abs(s - g)))


def binarize(s: np.ndarray, tau: int) -> np.ndarray:
    return s >= tau / 255.0


def pr_curve(s, g) -> PRCurve:
    """Precision/recall of ``s >= tau/255`` for tau = 0..255.

    An empty prediction has precision 1.
    """
    s, g = _prepare(s, g)
    n_gt = int(g.sum())
    if n_gt == 0:
        raise EmptyGroundTruthError("ground truth has no foreground")
    taus = np.arange(N_THRESHOLDS)
    # counts of predicted pixels at or above each threshold via reverse cumulative histograms
    bins = np.searchsorted(taus / 255.0, s.ravel(), side="right") - 1  # largest tau with tau/255 <= s
    bins = np.clip(bins, -1, N_THRESHOLDS - 1)
    valid = bins >= 0
    hist_all = np.bincount(bins[valid], minlength=N_THRESHOLDS)
    hist_tp = np.bincount(bins[valid & g.ravel()], minlength=N_THRESHOLDS)
    pred = np.cumsum(hist_all[::-1])[::-1]
    tp = np.cumsum(hist_tp[::-1])[::-1]
    precision = np.where(pred > 0, tp / np.maximum(pred, 1), 1.0)
    recall = tp / n_gt
    return PRCurve(taus, precision, recall)


def f_measure(precision, recall, beta2: float = BETA2):
    p = np.asarray(precision, dtype=np.float64)
    r = np.asarray(recall, dtype=np.float64)
    den = beta2 * p + r
    return np.where(p + r > 0, (1 + beta2) * p * r / np.where(den > 0, den, 1.0), 0.0)


def max_f(curve: PRCurve, beta2: float = BETA2) -> float:
    return float(np.max(f_measure(curve.precision, curve.recall, beta2)))


def weighted_f(s, g, sigma: float = 5.0, beta2: float = 1.0) -> float:
    """Weighted F-measure.

    The absolute error is smoothed with a Gaussian (``sigma``, truncated at
    4 sigma); foreground pixels keep the smaller of raw and smoothed error,
    background pixels get their error scaled up with distance from the
    object, ``2 - exp(ln(0.5) / 5 * dist)``.
    """
    s, g = _prepare(s, g)
    if not g.any():
        raise EmptyGroundTruthError("ground truth has no foreground")
    err = np.abs(s - g)
    smooth = ndimage.gaussian_filter(err, sigma=sigma, truncate=4.0, mode="reflect")
    dist = ndimage.distance_transform_edt(~g)
    importance = 2.0 - np.exp(np.log(0.5) / 5.0 * dist)
    weighted = np.where(g, np.minimum(err, smooth), err * importance)
    tp = np.sum(1.0 - weighted[g])
    fn = np.sum(weighted[g])
    fp = np.sum(weighted[~g])
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    if p + r == 0:
        return 0.0
    return float((1 + beta2) * p * r / (beta2 * p + r))


# --- S-measure -------------------------------------------------------------


def _object_score(values: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma))


def _s_object(s, g) -> float:
    u = g.mean()
    fg = _object_score(s[g])
    bg = _object_score(1.0 - s[~g])
    return float(u * fg + (1 - u) * bg)


def _ssim(s, g) -> float:
    dof = max(s.size - 1, 1)
    x = s.mean()
    y = g.mean()
    sx = np.sum((s - x) ** 2) / dof
    sy = np.sum((g - y) ** 2) / dof
    sxy = np.sum((s - x) * (g - y)) / dof
    alpha = 4 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    # alpha != 0 implies beta > 0
    if alpha != 0:
        return float(alpha / beta)
    if beta == 0:
        return 1.0
    return 0.0


def _centroid(g: np.ndarray) -> tuple[int, int]:
    h, w = g.shape
    if not g.any():
        return int(round(w / 2)), int(round(h / 2))
    ys, xs = np.nonzero(g)
    return int(np.round(xs.mean())) + 1, int(np.round(ys.mean())) + 1


def _s_region(s, g) -> float:
    h, w = g.shape
    x, y = _centroid(g)
    x, y = min(x, w), min(y, h)
    area = h * w
    quads = [
        (slice(0, y), slice(0, x)),
        (slice(0, y), slice(x, w)),
        (slice(y, h), slice(0, x)),
        (slice(y, h), slice(x, w)),
    ]
    score = 0.0
    for qy, qx in quads:
        sq, gq = s[qy, qx], g[qy, qx].astype(np.float64)
        if sq.size == 0:
            continue
        score += sq.size / area * _ssim(sq, gq)
    return score


def s_measure(s, g, alpha: float = 0.5) -> float:
    """Structure measure: object-aware plus region-aware (quadrant SSIM weighted by quadrant area)."""
    s, g = _prepare(s, g)
    y = g.mean()
    if y == 0:
        return float(1.0 - s.mean())
    if y == 1:
        return float(s.mean())
    q = alpha * _s_object(s, g) + (1 - alpha) * _s_region(s, g)
    return float(max(q, 0.0))


# --- E-measure -------------------------------------------------------------


def enhanced_alignment(b: np.ndarray, g: np.ndarray) -> float:
    """Enhanced-alignment score of one binary prediction."""
    b = np.asarray(b, dtype=np.float64)
    gf = np.asarray(g, dtype=np.float64)
    if not g.any():
        enhanced = 1.0 - b
    elif g.all():
        enhanced = b
    else:
        phi_b = b - b.mean()
        phi_g = gf - gf.mean()
        # phi_g is nonzero everywhere when g is not constant
        xi = 2.0 * phi_g * phi_b / (phi_g * phi_g + phi_b * phi_b)
        enhanced = (xi + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


def e_measure(s, g) -> float:
    """Mean enhanced-alignment over the 256 binarizations of ``s``."""
    s, g = _prepare(s, g)
    return float(np.mean([enhanced_alignment(binarize(s, t), g) for t in range(N_THRESHOLDS)]))


def evaluate_all(s, g) -> MetricsReport:
    s, g = _prepare(s, g)
    return MetricsReport(
        mae=mae(s, g),
        max_f=max_f(pr_curve(s, g)),
        weighted_f=weighted_f(s, g),
        s_measure=s_measure(s, g),
        e_measure=e_measure(s, g),
    )
