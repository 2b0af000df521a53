"""Displacement metrics and guidance-score reports."""

from .metrics import (
    DEFAULT_FRAME_RANGE,
    MISS_THRESHOLD_M,
    MetricReport,
    aggregate_reports,
    displacement_metrics,
    export_reports,
)
from .reports import guidance_report
