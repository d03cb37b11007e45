"""File-level orchestration: single enhancement, dataset batches and evaluation reports."""
from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .config import SessConfig
from .fusion import run_sess
from .raster import check_same_shape, load_image, load_saliency, rgb_to_lab, save_map

log = logging.getLogger(__name__)

RASTER_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".pnm", ".tif", ".tiff"}


class NoPairsError(RuntimeError):
    pass


@dataclass(frozen=True)
class DatasetLayout:
    images_dir: Path
    saliency_dir: Path
    out_dir: Path
    gt_dir: Path | None = None


def list_rasters(directory: str | os.PathLike) -> dict[str, Path]:
    """Map file stem -> path for every raster in a directory (case-sensitive stems)."""
    found: dict[str, Path] = {}
    for p in sorted(Path(directory).iterdir()):
        if p.is_file() and p.suffix.lower() in RASTER_SUFFIXES:
            if p.stem in found:
                log.warning("duplicate stem %r in %s, keeping %s", p.stem, directory, found[p.stem].name)
                continue
            found[p.stem] = p
    return found


def enhance_file(
    image: str | os.PathLike,
    saliency: str | os.PathLike,
    out: str | os.PathLike,
    cfg: SessConfig,
    dump_dir: str | os.PathLike | None = None,
) -> None:
    """Enhance one saliency map and write the result.

    Nothing is written unless the whole computation succeeds.
    """
    rgb = load_image(image)
    s0 = load_saliency(saliency)
    check_same_shape(rgb, s0, f"image {Path(image).name} and saliency {Path(saliency).name}")
    result = run_sess(rgb_to_lab(rgb), s0, cfg)
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for k, m in enumerate(result.iterations, start=1):
            save_map(m, dump_dir / f"iter_{k:02d}.png")
        save_map(result.integrated, dump_dir / "integrated.png")
    save_map(result.output, out)


def _batch_job(args):
    stem, image, saliency, out, cfg = args
    try:
        enhance_file(image, saliency, out, cfg)
    except Exception as exc:  # isolate per-image failures
        return stem, f"{type(exc).__name__}: {exc}"
    return stem, None


def run_batch(layout: DatasetLayout, cfg: SessConfig, jobs: int = 1) -> tuple[int, list[tuple[str, str]]]:
    """Enhance every saliency map that has an image with the same stem.

    Returns ``(processed, failures)``; failures are ``(stem, message)``.
    """
    images = list_rasters(layout.images_dir)
    maps = list_rasters(layout.saliency_dir)
    if not maps:
        raise NoPairsError(f"no saliency maps found in {layout.saliency_dir}")
    out_dir = Path(layout.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    failures: list[tuple[str, str]] = []
    tasks = []
    for stem, sal_path in maps.items():
        if stem not in images:
            failures.append((stem, "no matching image"))
            continue
        tasks.append((stem, images[stem], sal_path, out_dir / f"{stem}.png", cfg))
    if not tasks:
        raise NoPairsError("no saliency map has a matching image")

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_batch_job, tasks))
    else:
        results = [_batch_job(t) for t in tasks]

    processed = 0
    for stem, err in results:
        if err is None:
            processed += 1
        else:
            failures.append((stem, err))
    failures.sort()
    for stem, err in failures:
        log.warning("%s: skipped (%s)", stem, err)
    return processed, failures


# --- evaluation --------------------------------------------------------------

METRIC_FIELDS = ("mae", "max_f", "weighted_f", "s_measure", "e_measure")


@dataclass
class EvalResult:
    rows: list[tuple[str, metrics.MetricsReport]]
    precision: np.ndarray  # (256,) mean over images
    recall: np.ndarray
    skipped: list[tuple[str, str]]

    def mean(self) -> dict[str, float]:
        return {f: float(np.mean([getattr(r, f) for _, r in self.rows])) for f in METRIC_FIELDS}


def load_ground_truth(path: str | os.PathLike) -> np.ndarray:
    return load_saliency(path) >= 0.5


def evaluate_dirs(pred_dir: str | os.PathLike, gt_dir: str | os.PathLike) -> EvalResult:
    preds = list_rasters(pred_dir)
    gts = list_rasters(gt_dir)
    stems = sorted(set(preds) & set(gts))
    if not stems:
        raise NoPairsError(f"no prediction in {pred_dir} has a ground truth in {gt_dir}")

    rows = []
    skipped = []
    precisions, recalls = [], []
    for stem in stems:
        try:
            s = load_saliency(preds[stem])
            g = load_ground_truth(gts[stem])
            check_same_shape(s, g, f"{stem} prediction and ground truth")
        except (OSError, ValueError) as exc:
            skipped.append((stem, str(exc)))
            continue
        if not g.any():
            skipped.append((stem, "empty ground truth"))
            continue
        curve = metrics.pr_curve(s, g)
        precisions.append(curve.precision)
        recalls.append(curve.recall)
        rows.append((stem, metrics.evaluate_all(s, g)))
    if not rows:
        raise NoPairsError("every pair was skipped")
    for stem, why in skipped:
        log.warning("%s: skipped (%s)", stem, why)
    return EvalResult(rows, np.mean(precisions, axis=0), np.mean(recalls, axis=0), skipped)


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _write_csv(path: str | os.PathLike, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=path.parent)
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def write_report_csv(result: EvalResult, path: str | os.PathLike) -> None:
    rows = [[stem] + [_fmt(getattr(r, f)) for f in METRIC_FIELDS] for stem, r in result.rows]
    mean = result.mean()
    rows.append(["mean"] + [_fmt(mean[f]) for f in METRIC_FIELDS])
    _write_csv(path, ("image",) + METRIC_FIELDS, rows)


def write_pr_csv(result: EvalResult, path: str | os.PathLike) -> None:
    rows = [[t, _fmt(p), _fmt(r)] for t, (p, r) in enumerate(zip(result.precision, result.recall))]
    _write_csv(path, ("threshold", "precision", "recall"), rows)
