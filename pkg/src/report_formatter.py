"""
Console formatting for inspect, evaluation and training summaries
"""
from typing import Dict, Optional, Tuple

from src.models import MetricReport, NetworkConfig, TrainingSummary

BANNER = "=" * 70


def _optional(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


class ReportFormatter:
    """Formats command results as banner-delimited text blocks"""

    def _header(self, title: str) -> list:
        return [BANNER, title, BANNER]

    def format_inspect(self, config: NetworkConfig, param_count: int, size_mb: float, band_message: str,
                       input_size: Tuple[int, int], shapes: Dict[str, Tuple[int, ...]]) -> str:
        lines = self._header("JAFFNET MODEL")
        lines.append(f"Base width: {config.base_width}")
        lines.append(f"Fusion: {config.fusion.value}    Context: {config.context.value}")
        lines.append(f"Parameters: {param_count:,}")
        lines.append(f"Model size: {size_mb:.2f} MB")
        lines.append(f"Band check: {band_message}")
        lines.append("")
        lines.extend(self._header(f"STAGE SHAPES ({input_size[0]}x{input_size[1]} input)"))
        for name, shape in shapes.items():
            lines.append(f"{name:<8} {' x '.join(str(s) for s in shape)}")
        lines.append(BANNER)
        return "\n".join(lines)

    def format_metrics(self, report: MetricReport) -> str:
        lines = self._header("EVALUATION REPORT")
        lines.append(f"Images: {report.num_images}  (degenerate: {report.num_degenerate}, "
                     f"skipped: {report.num_skipped})")
        lines.append(f"MAE:      {report.mae:.4f}")
        lines.append(f"F_w:      {_optional(report.f_w)}")
        lines.append(f"S_m:      {report.s_m:.4f}")
        lines.append(f"E_m:      {report.e_m:.4f}")
        lines.append(f"max F:    {_optional(report.max_f)}")
        lines.append(f"mean F:   {_optional(report.mean_f)}")
        lines.append(BANNER)
        return "\n".join(lines)

    def format_training(self, summary: TrainingSummary) -> str:
        lines = self._header("TRAINING SUMMARY")
        lines.append(f"Steps: {summary.start_step} -> {summary.final_step}")
        lines.append(f"Initial loss: {_optional(summary.initial_loss)}")
        lines.append(f"Final loss:   {_optional(summary.final_loss)}")
        lines.append(f"Loss log: {summary.loss_log}")
        lines.append(BANNER)
        return "\n".join(lines)
