"""Superpixel-similarity saliency scoring and the enhancement loop.

Each iteration segments the image guided by the previous map, splits the
superpixels into foreground/background queries at the map's Otsu
threshold, and scores every superpixel by its color similarity to them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .raster import check_same_shape, otsu_threshold
from .superpixel import Segmentation, SuperpixelParams, oisf

log = logging.getLogger(__name__)

GUARD_THRESHOLD = 0.1
# absorbs float error in superpixel means when comparing against the threshold
_PSI_TOL = 1e-9


class EmptyQueryError(ValueError):
    """A query class needed by a score is empty."""


@dataclass(frozen=True)
class QueryPartition:
    """Foreground/background split of superpixels (0-based record indices)."""

    foreground: np.ndarray
    background: np.ndarray
    psi: float

    @property
    def is_foreground(self) -> np.ndarray:
        mask = np.zeros(len(self.foreground) + len(self.background), dtype=bool)
        mask[self.foreground] = True
        return mask


@dataclass(frozen=True)
class SemConfig:
    iterations: int = 12
    superpixels: int = 2500
    seeds_per_component: int = 10
    sigma2: float = 0.01
    superpixel_params: SuperpixelParams = field(default_factory=SuperpixelParams)
    decay: float = 0.8
    floor: int = 200

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.superpixels < 2:
            raise ValueError("superpixels must be >= 2")
        if self.seeds_per_component < 1:
            raise ValueError("seeds_per_component must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.floor < 1:
            raise ValueError("floor must be >= 1")

    def next_count(self, n: int) -> int:
        """Decay a superpixel count, never dropping below the floor (or below n if n is already under it)."""
        return max(int(math.floor(self.decay * n + 0.5)), min(self.floor, n))

    def schedule(self) -> list[int]:
        counts = [self.superpixels]
        for _ in range(self.iterations - 1):
            counts.append(self.next_count(counts[-1]))
        return counts


def similarity(a, b, sigma2: float) -> float:
    """Gaussian-weighted color similarity ``exp(-|a - b| / sigma2)``."""
    d0 = float(a[0]) - float(b[0])
    d1 = float(a[1]) - float(b[1])
    d2 = float(a[2]) - float(b[2])
    return math.exp(-math.sqrt(d0 * d0 + d1 * d1 + d2 * d2) / sigma2)


@numba.njit(cache=True)
def _sim(colors, i, j, sigma2):
    d0 = colors[i, 0] - colors[j, 0]
    d1 = colors[i, 1] - colors[j, 1]
    d2 = colors[i, 2] - colors[j, 2]
    return math.exp(-math.sqrt(d0 * d0 + d1 * d1 + d2 * d2) / sigma2)


@numba.njit(cache=True)
def _max_similarity(colors, targets, queries, sigma2):
    out = np.zeros(targets.size)
    for a in range(targets.size):
        best = 0.0
        for b in range(queries.size):
            v = _sim(colors, targets[a], queries[b], sigma2)
            if v > best:
                best = v
        out[a] = best
    return out


@numba.njit(cache=True)
def _background_sums(colors, queries, sigma2):
    k = colors.shape[0]
    out = np.zeros(k)
    for s in range(k):
        acc = 0.0
        for b in range(queries.size):
            r = queries[b]
            if r != s:
                acc += _sim(colors, s, r, sigma2)
        out[s] = acc
    return out


def partition_queries(seg: Segmentation, prev: np.ndarray) -> QueryPartition:
    """Superpixels whose mean previous saliency reaches the Otsu threshold are foreground queries."""
    psi = otsu_threshold(prev)
    fg = seg.mean_saliency >= psi - _PSI_TOL
    return QueryPartition(np.flatnonzero(fg), np.flatnonzero(~fg), psi)


def foreground_score(seg: Segmentation, q: QueryPartition, sigma2: float) -> np.ndarray:
    """Best similarity to any foreground query.

    Queries themselves would score 1; they are lowered to the best
    non-query score so they stay on the same scale. With no non-query at
    all every superpixel scores 1.
    """
    if q.foreground.size == 0:
        raise EmptyQueryError("no foreground queries")
    k = seg.n_superpixels
    scores = np.ones(k)
    if q.background.size == 0:
        return scores
    colors = np.ascontiguousarray(seg.mean_color, dtype=np.float64)
    others = np.ascontiguousarray(q.background, dtype=np.int64)
    scores[others] = _max_similarity(colors, others, np.ascontiguousarray(q.foreground, dtype=np.int64), sigma2)
    scores[q.foreground] = scores[others].max()
    return scores


def background_score(seg: Segmentation, q: QueryPartition, sigma2: float) -> np.ndarray:
    """One minus the summed similarity to background queries, divided by their count.

    The divisor stays ``|Q_B|`` even for a query, which skips itself in the sum.
    """
    if q.background.size == 0:
        raise EmptyQueryError("no background queries")
    colors = np.ascontiguousarray(seg.mean_color, dtype=np.float64)
    sums = _background_sums(colors, np.ascontiguousarray(q.background, dtype=np.int64), sigma2)
    return 1.0 - sums / q.background.size


def guard_distance(sb: np.ndarray, seg: Segmentation) -> float:
    """Pixel-weighted mean squared distance of the background score from 0.5."""
    return float(np.sum((sb - 0.5) ** 2 * seg.pixel_count) / np.sum(seg.pixel_count))


def background_guard(sb: np.ndarray, seg: Segmentation, prev: np.ndarray) -> np.ndarray:
    """Fall back to the previous map's superpixel means when ``sb`` hovers around 0.5."""
    d = guard_distance(sb, seg)
    if d >= GUARD_THRESHOLD:
        return sb
    log.debug("background score too flat (d=%.4f), using previous saliency", d)
    flat = seg.labels.ravel() - 1
    k = seg.n_superpixels
    return np.bincount(flat, weights=np.asarray(prev, dtype=np.float64).ravel(), minlength=k) / np.maximum(
        seg.pixel_count, 1
    )


def combine_scores(sf: np.ndarray, sb: np.ndarray) -> np.ndarray:
    return np.asarray(sf) * np.asarray(sb)


def normalize(sal: np.ndarray) -> np.ndarray:
    """Min-max normalize; constant maps come back unchanged."""
    lo, hi = float(sal.min()), float(sal.max())
    if hi <= lo:
        return sal
    return (sal - lo) / (hi - lo)


def render_scores(seg: Segmentation, scores: np.ndarray) -> np.ndarray:
    return normalize(seg.render(scores))


def enhance_once(lab: np.ndarray, prev: np.ndarray, n: int, cfg: SemConfig) -> np.ndarray:
    """One enhancement iteration; returns ``prev`` untouched when a query class is empty."""
    seg = oisf(lab, prev, n, cfg.seeds_per_component, cfg.superpixel_params)
    q = partition_queries(seg, prev)
    if q.foreground.size == 0 or q.background.size == 0:
        log.debug("degenerate queries (|Q_F|=%d, |Q_B|=%d), passing map through", q.foreground.size, q.background.size)
        return prev
    sf = foreground_score(seg, q, cfg.sigma2)
    sb = background_guard(background_score(seg, q, cfg.sigma2), seg, prev)
    return render_scores(seg, combine_scores(sf, sb))


def sem_loop(lab: np.ndarray, s0: np.ndarray, cfg: SemConfig) -> list[np.ndarray]:
    """Run ``cfg.iterations`` enhancement iterations, shrinking the superpixel count each time."""
    check_same_shape(lab, s0, "image and saliency")
    prev = np.asarray(s0, dtype=np.float64)
    maps = []
    for k, n in enumerate(cfg.schedule(), start=1):
        prev = enhance_once(lab, prev, n, cfg)
        log.debug("iteration %d/%d done with %d superpixels", k, cfg.iterations, n)
        maps.append(prev)
    return maps
