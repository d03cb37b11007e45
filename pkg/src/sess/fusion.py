"""Map integration and the end-to-end enhancement pipeline."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numba
import numpy as np

from .raster import check_same_shape, otsu_threshold
from .saliency import (
    SemConfig,
    foreground_score,
    partition_queries,
    render_scores,
    sem_loop,
)
from .superpixel import Segmentation, oisf

if TYPE_CHECKING:
    from .config import SessConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaConfig:
    lam: float = 0.0001
    steps: int = 3
    epsilon: float = 0.001

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must be in (0, 0.5)")


class MapStack:
    """Saliency maps stacked along z, with each layer's Otsu threshold."""

    def __init__(self, layers):
        layers = [np.asarray(m, dtype=np.float64) for m in layers]
        if not layers:
            raise ValueError("a map stack needs at least one layer")
        for m in layers[1:]:
            check_same_shape(layers[0], m, "stacked maps")
        self.layers = np.stack(layers)
        self.thresholds = np.array([otsu_threshold(m) for m in layers])

    def __len__(self) -> int:
        return self.layers.shape[0]


@numba.njit(cache=True)
def _ca_kernel(layers, cuts, lam, steps, eps):
    nz, h, w = layers.shape
    logits = np.empty((nz, h, w))
    for z in range(nz):
        for y in range(h):
            for x in range(w):
                p = min(max(layers[z, y, x], eps), 1.0 - eps)
                logits[z, y, x] = math.log(p / (1.0 - p))
    votes = np.empty((nz, h, w), dtype=np.int64)
    col = np.empty((h, w), dtype=np.int64)
    for _ in range(steps):
        col[:, :] = 0
        for z in range(nz):
            for y in range(h):
                for x in range(w):
                    v = 1 if logits[z, y, x] >= cuts[z] else -1
                    votes[z, y, x] = v
                    col[y, x] += v
        for y in range(h):
            for x in range(w):
                nb = col[y, x]
                if y > 0:
                    nb += col[y - 1, x]
                if y < h - 1:
                    nb += col[y + 1, x]
                if x > 0:
                    nb += col[y, x - 1]
                if x < w - 1:
                    nb += col[y, x + 1]
                for z in range(nz):
                    logits[z, y, x] = logits[z, y, x] + lam * (nb - votes[z, y, x])
    return logits


@numba.njit(cache=True)
def _mean_logistic(logits):
    nz, h, w = logits.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for z in range(nz):
                acc += 1.0 / (1.0 + math.exp(-logits[z, y, x]))
            out[y, x] = acc / nz
    return out


def _threshold_logit(t: float) -> float:
    if t <= 0.0:
        return -math.inf
    if t >= 1.0:
        return math.inf
    return math.log(t / (1.0 - t))


def ca_logits(stack: MapStack, cfg: CaConfig) -> np.ndarray:
    """Per-cell log-odds after ``cfg.steps`` synchronous updates, shape (Z, H, W)."""
    # sigmoid(l) >= t  <=>  l >= logit(t); avoids round-trip error when l == logit(t)
    cuts = np.array([_threshold_logit(float(t)) for t in stack.thresholds])
    layers = np.ascontiguousarray(stack.layers, dtype=np.float64)
    return _ca_kernel(layers, cuts, float(cfg.lam), int(cfg.steps), float(cfg.epsilon))


def integrate(stack: MapStack, cfg: CaConfig) -> np.ndarray:
    """Fuse a stack with a synchronous log-odds cellular automaton.

    A cell's neighbours are the co-located pixel and its 4-neighbours in
    every layer, minus the cell itself. Each neighbour votes +1 when its
    current probability reaches its layer's threshold and -1 otherwise; the
    cell's log-odds move by ``lam`` per vote. The output is the per-pixel
    mean probability over layers.
    """
    return _mean_logistic(ca_logits(stack, cfg))


def final_pass_count(cfg: SemConfig, keep_reduced: bool) -> int:
    """Superpixel count for the final color pass: the initial one, or the decayed schedule's next value."""
    if not keep_reduced:
        return cfg.superpixels
    return cfg.next_count(cfg.schedule()[-1])


def final_color_pass(
    lab: np.ndarray, integrated: np.ndarray, cfg: SemConfig, keep_reduced: bool = False
) -> tuple[np.ndarray, Segmentation]:
    """Foreground-only rescoring of the integrated map; returns ``(s_c, segmentation)``."""
    n = final_pass_count(cfg, keep_reduced)
    seg = oisf(lab, integrated, n, cfg.seeds_per_component, cfg.superpixel_params)
    q = partition_queries(seg, integrated)
    if q.foreground.size == 0 or q.background.size == 0:
        log.debug("final pass has degenerate queries, passing integrated map through")
        return integrated, seg
    return render_scores(seg, foreground_score(seg, q, cfg.sigma2)), seg


def reintroduce_deep(s0: np.ndarray, seg: Segmentation) -> np.ndarray:
    """Average the original map inside each superpixel (no normalization)."""
    flat = seg.labels.ravel() - 1
    k = seg.n_superpixels
    means = np.bincount(flat, weights=np.asarray(s0, dtype=np.float64).ravel(), minlength=k) / np.maximum(
        seg.pixel_count, 1
    )
    return seg.render(means)


def merge_final(sd: np.ndarray, sc: np.ndarray) -> np.ndarray:
    check_same_shape(sd, sc, "merged maps")
    return np.maximum(sd, sc)


def suppress_low(sal: np.ndarray) -> np.ndarray:
    """Zero every pixel below half the map's Otsu threshold."""
    psi = otsu_threshold(sal)
    out = np.array(sal, dtype=np.float64, copy=True)
    out[out < psi / 2] = 0.0
    return out


@dataclass
class SessResult:
    output: np.ndarray
    iterations: list[np.ndarray]
    integrated: np.ndarray
    color: np.ndarray
    deep: np.ndarray | None
    segmentation: Segmentation


def run_sess(lab: np.ndarray, s0: np.ndarray, cfg: SessConfig | None = None) -> SessResult:
    """Full pipeline, keeping the intermediate maps."""
    if cfg is None:
        from .config import SessConfig

        cfg = SessConfig()
    check_same_shape(lab, s0, "image and saliency")
    s0 = np.asarray(s0, dtype=np.float64)
    maps = sem_loop(lab, s0, cfg.sem)
    integrated = integrate(MapStack(maps), cfg.ca)
    sc, seg = final_color_pass(lab, integrated, cfg.sem, cfg.keep_reduced_superpixels)
    if cfg.no_deep_reintro:
        sd = None
        merged = sc
    else:
        sd = reintroduce_deep(s0, seg)
        merged = merge_final(sd, sc)
    return SessResult(suppress_low(merged), maps, integrated, sc, sd, seg)


def sess(lab: np.ndarray, s0: np.ndarray, cfg: SessConfig | None = None) -> np.ndarray:
    """Enhance the saliency map ``s0`` of the Lab image ``lab``."""
    return run_sess(lab, s0, cfg).output
