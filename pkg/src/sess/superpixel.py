"""Object-based superpixel segmentation.

Seeds are sampled from a saliency map (a fixed number inside each salient
component, the rest in the background), grown into an optimum-path forest
over the 8-adjacent pixel graph, and re-centered for a few rounds.

Arc weight from ``s`` to ``t`` for a tree rooted at ``r``::

    (alpha * D(t, r)) ** beta + |t - s|
    D(t, r) = |lab(t) - mu_r| * (1 + gamma * |sal(t) - sal(seed_r)|)
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from PIL import Image

from .raster import check_same_shape, connected_components, otsu_threshold

SQRT2 = math.sqrt(2.0)

# (dy, dx), fixed order keeps the forest deterministic
_NEIGHBORS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)], dtype=np.int64
)


class SeedCountError(ValueError):
    pass


@dataclass(frozen=True)
class SuperpixelParams:
    alpha: float = 12.0
    beta: float = 0.5
    gamma: float = 10.0
    iters: int = 5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")


@dataclass(frozen=True)
class SeedSet:
    positions: np.ndarray  # (K, 2) int64, (row, col)
    object_flags: np.ndarray  # (K,) bool

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class Segmentation:
    """Superpixel labels (1..K) plus per-superpixel records indexed by ``label - 1``."""

    labels: np.ndarray
    mean_color: np.ndarray
    pixel_count: np.ndarray
    mean_saliency: np.ndarray
    seeds: SeedSet
    costs: np.ndarray | None = None

    @property
    def n_superpixels(self) -> int:
        return len(self.pixel_count)

    @classmethod
    def from_labels(cls, labels, lab, sal, seeds, costs=None) -> "Segmentation":
        k = len(seeds)
        flat = labels.ravel() - 1
        count = np.bincount(flat, minlength=k).astype(np.int64)
        denom = np.maximum(count, 1)
        color = np.stack(
            [np.bincount(flat, weights=lab[..., c].ravel(), minlength=k) / denom for c in range(3)],
            axis=1,
        )
        mean_sal = np.bincount(flat, weights=sal.ravel(), minlength=k) / denom
        return cls(labels, color, count, mean_sal, seeds, costs)

    def render(self, scores: np.ndarray) -> np.ndarray:
        """Paint per-superpixel values back onto pixels."""
        return np.asarray(scores, dtype=np.float64)[self.labels - 1]


# ---------------------------------------------------------------------------
# seed sampling


def _place_in_region(ys: np.ndarray, xs: np.ndarray, k: int) -> np.ndarray:
    """Pick ``k`` pixels of a region (given in raster order); returns indices into ys/xs."""
    area = ys.size
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= area:
        return np.arange(area, dtype=np.int64)

    stride = math.sqrt(area / k)
    y0, x0 = ys.min(), xs.min()
    cy = np.floor((ys - y0 + 0.5) / stride).astype(np.int64)
    cx = np.floor((xs - x0 + 0.5) / stride).astype(np.int64)
    ccy = y0 - 0.5 + (cy + 0.5) * stride
    ccx = x0 - 0.5 + (cx + 0.5) * stride
    d2 = (ys - ccy) ** 2 + (xs - ccx) ** 2
    cell = cy * (cx.max() + 1) + cx
    order = np.lexsort((np.arange(area), d2, cell))
    first = np.ones(area, dtype=bool)
    first[1:] = cell[order][1:] != cell[order][:-1]
    picked = order[first]  # one snapped pixel per occupied cell, cell raster order

    m = picked.size
    if m > k:
        picked = picked[np.floor((np.arange(k) + 0.5) * m / k).astype(np.int64)]
    elif m < k:
        picked = _farthest_fill(ys, xs, picked, k)
    return picked


def _farthest_fill(ys, xs, picked, k):
    chosen = list(picked)
    mind = np.full(ys.size, np.inf)
    for i in chosen:
        mind = np.minimum(mind, (ys - ys[i]) ** 2 + (xs - xs[i]) ** 2)
    while len(chosen) < k:
        i = int(np.argmax(mind))
        chosen.append(i)
        mind = np.minimum(mind, (ys - ys[i]) ** 2 + (xs - xs[i]) ** 2)
    return np.asarray(chosen, dtype=np.int64)


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    if total <= 0 or weights.size == 0:
        return np.zeros(weights.size, dtype=np.int64)
    exact = total * weights / weights.sum()
    base = np.floor(exact).astype(np.int64)
    rest = total - int(base.sum())
    if rest > 0:
        order = np.lexsort((np.arange(weights.size), -(exact - base)))
        base[order[:rest]] += 1
    return base


def object_mask(sal: np.ndarray) -> np.ndarray:
    """Otsu foreground of a map; zero-valued pixels are never foreground."""
    return (sal >= otsu_threshold(sal)) & (sal > 0)


def object_seed_count(n: int, n_s: int, n_c: int) -> int:
    if n_c <= 0:
        return 0
    return int(min(max(n_s * n_c, n_c), n - 1))


def sample_seeds(sal: np.ndarray, n: int, n_s: int) -> SeedSet:
    """Deterministic saliency-guided seed sampling.

    ``n_s * n_c`` seeds (clamped to ``[n_c, n - 1]``) go inside the ``n_c``
    salient components, split by area with at least one per component; the
    rest go to the background. Grid sampling per region, farthest-point
    fill when the grid comes up short.
    """
    sal = np.asarray(sal, dtype=np.float64)
    if n < 2:
        raise SeedCountError("need at least 2 seeds")
    if n_s < 1:
        raise SeedCountError("seeds per component must be >= 1")
    h, w = sal.shape
    if h * w < n:
        raise SeedCountError(f"image has {h * w} pixels, fewer than the {n} requested seeds")

    mask = object_mask(sal)
    n_c, comp = connected_components(mask)
    n_os = object_seed_count(n, n_s, n_c)

    chosen: list[np.ndarray] = []
    if n_os > 0:
        areas = np.bincount(comp.ravel(), minlength=n_c + 1)[1:]
        if n_c > n_os:
            # more components than seeds: one each for the largest
            alloc = np.zeros(n_c, dtype=np.int64)
            alloc[np.lexsort((np.arange(n_c), -areas))[:n_os]] = 1
        else:
            alloc = 1 + _largest_remainder(n_os - n_c, areas.astype(np.float64))
        flat_comp = comp.ravel()
        order = np.argsort(flat_comp, kind="stable")
        bounds = np.searchsorted(flat_comp[order], np.arange(1, n_c + 2))
        for c in range(n_c):
            idx = order[bounds[c] : bounds[c + 1]]
            k = int(min(alloc[c], idx.size))
            if k:
                picked = _place_in_region(idx // w, idx % w, k)
                chosen.append(idx[picked])

    placed = sum(len(c) for c in chosen)
    bg_idx = np.flatnonzero(~mask.ravel())
    n_bg = n - placed
    picked = _place_in_region(bg_idx // w, bg_idx % w, min(n_bg, bg_idx.size))
    chosen.append(bg_idx[picked])

    flat = np.concatenate(chosen) if chosen else np.empty(0, dtype=np.int64)
    if flat.size < n:
        free = np.ones(h * w, dtype=bool)
        free[flat] = False
        rest = np.flatnonzero(free)
        ys, xs = rest // w, rest % w
        # farthest fill relative to seeds already placed
        mind = np.full(rest.size, np.inf)
        for p in flat:
            mind = np.minimum(mind, (ys - p // w) ** 2 + (xs - p % w) ** 2)
        extra = []
        while flat.size + len(extra) < n:
            i = int(np.argmax(mind))
            extra.append(rest[i])
            mind = np.minimum(mind, (ys - ys[i]) ** 2 + (xs - xs[i]) ** 2)
            mind[i] = -1.0
        flat = np.concatenate([flat, np.asarray(extra, dtype=np.int64)])

    positions = np.stack([flat // w, flat % w], axis=1).astype(np.int64)
    return SeedSet(positions, mask.ravel()[flat].copy())


# ---------------------------------------------------------------------------
# image foresting transform


@numba.njit(cache=True, inline="always")
def _less(c1, s1, c2, s2):
    return c1 < c2 or (c1 == c2 and s1 < s2)


@numba.njit(cache=True)
def _heap_push(hc, hs, hn, size, c, s, n):
    i = size
    hc[i] = c
    hs[i] = s
    hn[i] = n
    while i > 0:
        parent = (i - 1) >> 1
        if _less(hc[i], hs[i], hc[parent], hs[parent]):
            hc[i], hc[parent] = hc[parent], hc[i]
            hs[i], hs[parent] = hs[parent], hs[i]
            hn[i], hn[parent] = hn[parent], hn[i]
            i = parent
        else:
            break
    return size + 1


@numba.njit(cache=True)
def _heap_pop(hc, hs, hn, size):
    c, n = hc[0], hn[0]
    size -= 1
    hc[0], hs[0], hn[0] = hc[size], hs[size], hn[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        best = left
        right = left + 1
        if right < size and _less(hc[right], hs[right], hc[left], hs[left]):
            best = right
        if _less(hc[best], hs[best], hc[i], hs[i]):
            hc[i], hc[best] = hc[best], hc[i]
            hs[i], hs[best] = hs[best], hs[i]
            hn[i], hn[best] = hn[best], hn[i]
            i = best
        else:
            break
    return c, n, size


@numba.njit(cache=True)
def _ift_kernel(lab, sal, seed_y, seed_x, mu, alpha, beta, gamma, neighbors):
    h, w = sal.shape
    npx = h * w
    k = seed_y.size
    cost = np.full(npx, np.inf)
    root = np.full(npx, -1, dtype=np.int32)
    done = np.zeros(npx, dtype=np.bool_)
    cap = k + 8 * npx + 1
    hc = np.empty(cap, dtype=np.float64)
    hs = np.empty(cap, dtype=np.int64)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    seq = 0
    seed_sal = np.empty(k, dtype=np.float64)
    for r in range(k):
        p = seed_y[r] * w + seed_x[r]
        seed_sal[r] = sal[seed_y[r], seed_x[r]]
        cost[p] = 0.0
        root[p] = r
        size = _heap_push(hc, hs, hn, size, 0.0, seq, p)
        seq += 1

    while size > 0:
        c, p, size = _heap_pop(hc, hs, hn, size)
        if done[p] or c > cost[p]:
            continue
        done[p] = True
        py = p // w
        px = p - py * w
        r = root[p]
        for j in range(8):
            dy = neighbors[j, 0]
            dx = neighbors[j, 1]
            qy = py + dy
            qx = px + dx
            if qy < 0 or qy >= h or qx < 0 or qx >= w:
                continue
            q = qy * w + qx
            if done[q]:
                continue
            d0 = lab[qy, qx, 0] - mu[r, 0]
            d1 = lab[qy, qx, 1] - mu[r, 1]
            d2 = lab[qy, qx, 2] - mu[r, 2]
            dist = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            big_d = dist * (1.0 + gamma * abs(sal[qy, qx] - seed_sal[r]))
            step = 1.0 if dy == 0 or dx == 0 else SQRT2
            nc = c + (math.pow(alpha * big_d, beta) + step)
            if nc < cost[q]:
                cost[q] = nc
                root[q] = r
                size = _heap_push(hc, hs, hn, size, nc, seq, q)
                seq += 1
    return root.reshape(h, w), cost.reshape(h, w)


def ift_segment(
    lab: np.ndarray,
    sal: np.ndarray,
    seeds: SeedSet,
    params: SuperpixelParams,
    mean_colors: np.ndarray | None = None,
) -> Segmentation:
    """Optimum-path forest from ``seeds``; ``mean_colors`` defaults to the seed pixels' colors."""
    check_same_shape(lab, sal, "image and saliency")
    if len(seeds) == 0:
        raise ValueError("ift_segment needs at least one seed")
    lab = np.ascontiguousarray(lab, dtype=np.float64)
    sal = np.ascontiguousarray(sal, dtype=np.float64)
    ys = np.ascontiguousarray(seeds.positions[:, 0], dtype=np.int64)
    xs = np.ascontiguousarray(seeds.positions[:, 1], dtype=np.int64)
    if mean_colors is None:
        mu = lab[ys, xs].copy()
    else:
        mu = np.ascontiguousarray(mean_colors, dtype=np.float64)
        if mu.shape != (len(seeds), 3):
            raise ValueError("mean_colors must have one Lab vector per seed")
    root, cost = _ift_kernel(
        lab, sal, ys, xs, mu, float(params.alpha), float(params.beta), float(params.gamma), _NEIGHBORS
    )
    labels = root + 1
    return Segmentation.from_labels(labels, lab, sal, seeds, cost)


def recenter_seeds(seg: Segmentation) -> SeedSet:
    """Move each seed to the member pixel closest to its superpixel's centroid."""
    labels = seg.labels
    h, w = labels.shape
    k = seg.n_superpixels
    flat = labels.ravel() - 1
    ys, xs = np.divmod(np.arange(h * w), w)
    count = np.maximum(np.bincount(flat, minlength=k), 1)
    cy = np.bincount(flat, weights=ys, minlength=k) / count
    cx = np.bincount(flat, weights=xs, minlength=k) / count
    d2 = (ys - cy[flat]) ** 2 + (xs - cx[flat]) ** 2
    order = np.lexsort((np.arange(h * w), d2, flat))
    first = np.ones(order.size, dtype=bool)
    first[1:] = flat[order][1:] != flat[order][:-1]
    best = order[first]
    out = seg.seeds.positions.copy()
    out[flat[best]] = np.stack([ys[best], xs[best]], axis=1)
    return SeedSet(out, seg.seeds.object_flags.copy())


def oisf(lab: np.ndarray, sal: np.ndarray, n: int, n_s: int, params: SuperpixelParams) -> Segmentation:
    """Sample seeds, then ``params.iters`` rounds of forest growth + mean update + recentering."""
    check_same_shape(lab, sal, "image and saliency")
    seeds = sample_seeds(sal, n, n_s)
    mu = None
    seg = None
    for rnd in range(params.iters):
        seg = ift_segment(lab, sal, seeds, params, mu)
        if rnd + 1 < params.iters:
            mu = seg.mean_color
            seeds = recenter_seeds(seg)
    return seg


# ---------------------------------------------------------------------------
# debug export


def save_labels(labels: np.ndarray, path: str | os.PathLike) -> None:
    """Label raster as a 16-bit grayscale PNG."""
    if labels.max() > 65535:
        raise ValueError("too many labels for a 16-bit PNG")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    edge = np.zeros(labels.shape, dtype=bool)
    edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    edge[1:, :] |= labels[1:, :] != labels[:-1, :]
    return edge


def save_boundary_overlay(rgb: np.ndarray, labels: np.ndarray, path: str | os.PathLike, color=(255, 0, 0)) -> None:
    out = np.array(rgb, dtype=np.uint8, copy=True)
    out[boundary_mask(labels)] = color
    Image.fromarray(out, mode="RGB").save(path)
