"""
Dataset evaluation: pairs saliency-map PNGs with ground-truth masks, computes the
metric suite per image and aggregates it.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src import metrics
from src.data import IMAGE_SUFFIX, MASK_DIR, binarize_gt, read_gray, resize
from src.errors import DegenerateMaskError, EmptyDatasetError, UnpairedFileError
from src.models import ImageMetrics, MetricReport
from src.runtime import evaluator_threads

logger = logging.getLogger(__name__)


class ImageResult(NamedTuple):
    metrics: ImageMetrics
    precision: Optional[np.ndarray] = None
    recall: Optional[np.ndarray] = None
    f_beta: Optional[np.ndarray] = None


class EvaluationResult(NamedTuple):
    report: MetricReport
    per_image: List[ImageMetrics]


def evaluate_pair(name: str, pred: np.ndarray, gt: np.ndarray) -> ImageResult:
    """All metrics for one map; the prediction is resized to the ground-truth resolution"""
    height, width = gt.shape
    pred = np.clip(resize(np.asarray(pred, dtype=np.float64), (height, width)), 0.0, 1.0)
    common = dict(
        name=name,
        height=height,
        width=width,
        mae=metrics.mae(pred, gt),
        s_m=metrics.s_measure(pred, gt),
        e_m=metrics.e_measure(pred, gt),
    )
    try:
        precision, recall, f_beta = metrics.pr_and_f_curves(pred, gt)
        f_w = metrics.weighted_fbeta(pred, gt)
    except DegenerateMaskError:
        return ImageResult(ImageMetrics(**common, degenerate=True))
    return ImageResult(
        ImageMetrics(**common, f_w=f_w, max_f=float(f_beta.max())),
        precision, recall, f_beta,
    )


def aggregate(results: Sequence[ImageResult], num_skipped: int = 0) -> MetricReport:
    if not results:
        raise EmptyDatasetError("no readable prediction/ground-truth pairs to evaluate")
    curves = [r for r in results if not r.metrics.degenerate]
    report = dict(
        mae=float(np.mean([r.metrics.mae for r in results])),
        s_m=float(np.mean([r.metrics.s_m for r in results])),
        e_m=float(np.mean([r.metrics.e_m for r in results])),
        num_images=len(results),
        num_degenerate=len(results) - len(curves),
        num_skipped=num_skipped,
    )
    if curves:
        f_beta = np.mean([r.f_beta for r in curves], axis=0)
        report.update(
            f_w=float(np.mean([r.metrics.f_w for r in curves])),
            precision=np.mean([r.precision for r in curves], axis=0).tolist(),
            recall=np.mean([r.recall for r in curves], axis=0).tolist(),
            f_beta=f_beta.tolist(),
            max_f=float(f_beta.max()),
            mean_f=float(f_beta.mean()),
        )
    return MetricReport(**report)


def _gt_root(gt_dir: Path) -> Path:
    # Accept either a bare mask directory or a dataset root holding masks/
    return gt_dir / MASK_DIR if (gt_dir / MASK_DIR).is_dir() else gt_dir


def pair_files(pred_dir: Union[str, Path], gt_dir: Union[str, Path]) -> List[Tuple[str, Path, Path]]:
    pred_dir, gt_dir = Path(pred_dir), _gt_root(Path(gt_dir))
    preds = {p.name: p for p in sorted(pred_dir.glob(f"*{IMAGE_SUFFIX}"))}
    gts = {p.name: p for p in sorted(gt_dir.glob(f"*{IMAGE_SUFFIX}"))}
    if not preds:
        raise EmptyDatasetError(f"no predictions found under '{pred_dir}'")
    missing_gt = sorted(set(preds) - set(gts))
    if missing_gt:
        raise UnpairedFileError(missing_gt[0], str(gt_dir))
    missing_pred = sorted(set(gts) - set(preds))
    if missing_pred:
        raise UnpairedFileError(missing_pred[0], str(pred_dir))
    return [(name, preds[name], gts[name]) for name in sorted(preds)]


def _evaluate_file(item: Tuple[str, Path, Path]) -> Optional[ImageResult]:
    name, pred_path, gt_path = item
    pred, gt = read_gray(pred_path), read_gray(gt_path)
    if pred is None or gt is None:
        logger.warning("Skipping unreadable pair '%s'", name)
        return None
    return evaluate_pair(name, pred, binarize_gt(gt))


def evaluate_dataset(pred_dir: Union[str, Path], gt_dir: Union[str, Path]) -> EvaluationResult:
    pairs = pair_files(pred_dir, gt_dir)
    threads = min(evaluator_threads(), len(pairs))
    logger.info("Evaluating %d pairs with %d thread(s)", len(pairs), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        outcomes = list(pool.map(_evaluate_file, pairs))
    results = [r for r in outcomes if r is not None]
    report = aggregate(results, num_skipped=len(outcomes) - len(results))
    return EvaluationResult(report=report, per_image=[r.metrics for r in results])


def report_paths(report_path: Union[str, Path]) -> dict:
    report_path = Path(report_path)
    base = report_path.with_suffix("")
    return {
        "report": base.with_name(base.name + ".csv"),
        "per_image": base.with_name(base.name + "_per_image.csv"),
        "curves": base.with_name(base.name + "_curves.csv"),
        "plot": base.with_name(base.name + "_curves.png"),
    }


def curve_frame(report: MetricReport) -> pd.DataFrame:
    if not report.f_beta:
        return pd.DataFrame(columns=["threshold", "precision", "recall", "f"])
    return pd.DataFrame({
        "threshold": metrics.thresholds(),
        "precision": report.precision,
        "recall": report.recall,
        "f": report.f_beta,
    })


def write_report(result: EvaluationResult, report_path: Union[str, Path], plot: bool = False) -> List[Path]:
    """Aggregate, per-image and curve CSVs (plus the curve PNG when asked)"""
    paths = report_paths(report_path)
    paths["report"].parent.mkdir(parents=True, exist_ok=True)
    scalars = result.report.model_dump(exclude={"precision", "recall", "f_beta"})
    pd.DataFrame([scalars]).to_csv(paths["report"], index=False)
    pd.DataFrame([m.model_dump() for m in result.per_image]).to_csv(paths["per_image"], index=False)
    curve_frame(result.report).to_csv(paths["curves"], index=False)
    written = [paths["report"], paths["per_image"], paths["curves"]]
    if plot:
        written.append(plot_curves(result.report, paths["plot"]))
    return written


def plot_curves(report: MetricReport, path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (pr_ax, f_ax) = plt.subplots(1, 2, figsize=(10, 4))
    if report.f_beta:
        pr_ax.plot(report.recall, report.precision)
        f_ax.plot(metrics.thresholds(), report.f_beta)
    pr_ax.set(xlabel="Recall", ylabel="Precision", title="PR curve", xlim=(0, 1), ylim=(0, 1.05))
    f_ax.set(xlabel="Threshold", ylabel="F-measure", title="F-measure curve", xlim=(0, 1), ylim=(0, 1.05))
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
