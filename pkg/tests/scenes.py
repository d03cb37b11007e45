"""Synthetic scenes with known ground truth."""
from __future__ import annotations

import numpy as np

BACKGROUND = (60, 110, 170)
OBJECT = (210, 50, 40)
BLOB = (40, 170, 60)


def disk(shape, center, radius):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    return (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius**2


def paint(mask_colors, shape=(256, 256), background=BACKGROUND):
    rgb = np.empty(shape + (3,), dtype=np.uint8)
    rgb[:] = background
    for mask, color in mask_colors:
        rgb[mask] = color
    return rgb


def two_disks(shape=(256, 256)):
    """Two same-colored disks; the input map only knows about disk A.

    The radii differ so that recovering B moves max-F by more than it
    could for equal areas.
    """
    a = disk(shape, (80, 70), 30)
    b = disk(shape, (170, 175), 50)
    rgb = paint([(a | b, OBJECT)], shape)
    return rgb, a.astype(np.float64), a, b


def half_disk(shape=(256, 256)):
    d = disk(shape, (128, 128), 60)
    xx = np.mgrid[: shape[0], : shape[1]][1]
    s0 = (d & (xx < 128)).astype(np.float64)
    return paint([(d, OBJECT)], shape), s0, d


def two_disks_with_blob(blob_value=0.4, shape=(256, 256)):
    """Two-disk scene plus a uniquely colored blob the input map half-believes in."""
    rgb, s0, a, b = two_disks(shape)
    blob = disk(shape, (200, 50), 14)
    rgb[blob] = BLOB
    s0 = s0.copy()
    s0[blob] = blob_value
    return rgb, s0, a, b, blob


def stemmed_disk(width=5, shape=(256, 256)):
    """A disk with a thin vertical stem of the same color; the input map is exact."""
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    d = disk(shape, (150, 128), 45)
    left = 128 - width // 2
    stem = (xx >= left) & (xx < left + width) & (yy >= 20) & (yy < 110)
    obj = d | stem
    return paint([(obj, OBJECT)], shape), obj.astype(np.float64), obj, stem
