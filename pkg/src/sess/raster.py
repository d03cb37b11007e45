"""Image and map primitives.

Rasters are plain numpy arrays:

* RGB image      -- ``(H, W, 3)`` uint8
* Lab image      -- ``(H, W, 3)`` float64, every channel scaled to [0, 1]
* saliency map   -- ``(H, W)`` float64 in [0, 1]
* binary mask    -- ``(H, W)`` bool
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage


class RasterFormatError(ValueError):
    """Raised when a file is not a decodable raster of a supported kind."""


# sRGB primaries -> XYZ, D65 (IEC 61966-2-1)
_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# values stored as k/255 must land in bin k despite float error
_BIN_EPS = 1e-6


def _open(path: str | os.PathLike) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise RasterFormatError(f"unsupported raster format: {path}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise RasterFormatError(f"corrupt raster file: {path} ({exc})") from exc
    return img


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a raster file into an ``(H, W, 3)`` uint8 array."""
    img = _open(path)
    if img.mode not in ("RGB", "RGBA", "L", "P", "1", "LA"):
        raise RasterFormatError(f"unsupported pixel mode {img.mode!r}: {path}")
    return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def load_saliency(path: str | os.PathLike) -> np.ndarray:
    """Load an 8-bit grayscale map, scaling byte ``v`` to ``v / 255``.

    RGB files are accepted only when all three channels are equal.
    """
    img = _open(path)
    if img.mode in ("L", "1"):
        data = np.asarray(img.convert("L"))
    elif img.mode in ("RGB", "RGBA", "P", "LA"):
        if img.mode == "LA":
            data = np.asarray(img.convert("L"))
        else:
            rgb = np.asarray(img.convert("RGB"))
            if not (np.array_equal(rgb[..., 0], rgb[..., 1]) and np.array_equal(rgb[..., 0], rgb[..., 2])):
                raise RasterFormatError(f"saliency map has unequal color channels: {path}")
            data = rgb[..., 0]
    else:
        raise RasterFormatError(f"unsupported saliency pixel mode {img.mode!r}: {path}")
    return data.astype(np.float64) / 255.0


def to_bytes(sal: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] map to bytes with round-half-up."""
    return np.floor(np.clip(sal, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _atomic_save(img: Image.Image, path: str | os.PathLike) -> None:
    path = Path(path)
    fmt = Image.registered_extensions().get(path.suffix.lower(), "PNG")
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=path.suffix, dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            img.save(fh, format=fmt)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_map(sal: np.ndarray, path: str | os.PathLike) -> None:
    """Write a saliency map as an 8-bit grayscale file (pixel = round(v*255))."""
    _atomic_save(Image.fromarray(to_bytes(sal), mode="L"), path)


def save_image(rgb: np.ndarray, path: str | os.PathLike) -> None:
    _atomic_save(Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB"), path)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """sRGB (8-bit) to CIELab under D65, each channel rescaled to [0, 1].

    Scaling: ``L/100``, ``(a+128)/255``, ``(b+128)/255``, then clamped.
    """
    rgb = np.asarray(rgb)
    lin = _srgb_to_linear(rgb.astype(np.float64) / 255.0)
    xyz = lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / D65_WHITE)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    lab = np.stack([L / 100.0, (a + 128.0) / 255.0, (b + 128.0) / 255.0], axis=-1)
    return np.clip(lab, 0.0, 1.0)


def histogram_bins(sal: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to integer bins 0..255 (value ``k/255`` -> bin ``k``)."""
    return np.clip(np.floor(np.asarray(sal, dtype=np.float64) * 255.0 + _BIN_EPS), 0, 255).astype(np.int64)


def otsu_threshold(sal: np.ndarray) -> float:
    """Otsu threshold on a 256-bin histogram, returned as ``k / 255``.

    Foreground is ``v >= threshold``. Candidates are ``k = 1..255``; the
    smallest ``k`` maximizing the between-class variance wins. Comparisons
    are done in exact integer arithmetic so ties are real ties. When only
    one bin is occupied the threshold is that bin, i.e. the whole map is
    foreground.
    """
    sal = np.asarray(sal)
    if sal.size == 0:
        raise ValueError("otsu_threshold needs a nonempty map")
    hist = np.bincount(histogram_bins(sal).ravel(), minlength=256)
    occupied = np.flatnonzero(hist)
    if occupied.size == 1:
        return float(occupied[0]) / 255.0

    counts = [int(c) for c in hist]
    total_n = sum(counts)
    total_s = sum(i * c for i, c in enumerate(counts))
    # between-class variance is proportional to (s0*N - S*n0)^2 / (n0*n1)
    best_num, best_den, best_k = -1, 1, 1
    n0 = s0 = 0
    for k in range(1, 256):
        n0 += counts[k - 1]
        s0 += (k - 1) * counts[k - 1]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            num, den = (s0 * total_n - total_s * n0) ** 2, n0 * n1
        if num * best_den > best_num * den:
            best_num, best_den, best_k = num, den, k
    return best_k / 255.0


_EIGHT = np.ones((3, 3), dtype=bool)


def connected_components(mask: np.ndarray) -> tuple[int, np.ndarray]:
    """8-connected components of ``True`` pixels, labeled 1..count in raster order."""
    labels, count = ndimage.label(np.asarray(mask, dtype=bool), structure=_EIGHT)
    return int(count), labels.astype(np.int32)


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "maps") -> None:
    if a.shape[:2] != b.shape[:2]:
        ha, wa = a.shape[:2]
        hb, wb = b.shape[:2]
        raise ValueError(f"dimension mismatch between {what}: {wa}x{ha} vs {wb}x{hb}")
