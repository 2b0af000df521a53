"""Displacement metrics: marginal and joint best-of-N, plus miss rate.

Marginal metrics give every agent its own best sample; joint metrics
average over agents within a sample first and then pick the best sample,
independently per metric family.  Distances are meters; masked (padded)
frames are excluded; the evaluation range defaults to the generated
frames 10..63.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

MISS_THRESHOLD_M = 2.0
DEFAULT_FRAME_RANGE = (10, 64)


@dataclass
class MetricReport:
    ade: float
    fde: float
    mr: float  # percent
    jade: float
    jfde: float
    jmr: float  # percent
    guidance_scores: Optional[list] = None
    reference_score: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def displacement_metrics(
    predictions,
    truth,
    validity=None,
    frame_range=DEFAULT_FRAME_RANGE,
    include_ball: bool = True,
) -> MetricReport:
    """Best-of-N displacement metrics for one instance.

    ``predictions``: (N, A, H, 2); ``truth``: (A, H, 2); ``validity``:
    optional (A, H) 0/1 mask.  FDE uses each agent's final valid frame in
    range.  MR is the percentage of agents whose best FDE exceeds 2 m;
    JMR the best per-sample percentage.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    gt = np.asarray(truth, dtype=np.float64)
    if preds.ndim != 4 or gt.ndim != 3:
        raise ValueError(f"expected (N,A,H,2) and (A,H,2), got {preds.shape} and {gt.shape}")
    N, A, H, _ = preds.shape
    lo, hi = frame_range
    if not 0 <= lo < hi <= H:
        raise ValueError(f"invalid frame range {frame_range} for horizon {H}")
    mask = np.ones((A, H)) if validity is None else np.asarray(validity, dtype=np.float64)

    agents = np.arange(A) if include_ball else np.arange(A - 1)
    preds = preds[:, agents]
    gt = gt[agents]
    mask = mask[agents]

    window_mask = mask[:, lo:hi]
    if not window_mask.any():
        raise ValueError("empty valid frame range")
    dist = np.linalg.norm(preds[:, :, lo:hi] - gt[None, :, lo:hi], axis=-1)  # (N, A', F)

    counts = window_mask.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("an agent has no valid frames in range")
    ade_na = (dist * window_mask[None]).sum(axis=2) / counts[None]  # (N, A')

    frame_idx = np.arange(lo, hi)
    last = np.where(window_mask > 0, frame_idx[None, :], -1).max(axis=1)  # (A',)
    fde_na = dist[:, np.arange(len(agents)), last - lo]  # (N, A')

    # marginal: best sample per agent, then averaged over agents
    ade = float(ade_na.min(axis=0).mean())
    fde = float(fde_na.min(axis=0).mean())
    mr = float((fde_na.min(axis=0) > MISS_THRESHOLD_M).mean() * 100.0)

    # joint: agent means per sample, then the best sample per family
    jade = float(ade_na.mean(axis=1).min())
    jfde = float(fde_na.mean(axis=1).min())
    jmr = float((fde_na > MISS_THRESHOLD_M).mean(axis=1).min() * 100.0)
    return MetricReport(ade=ade, fde=fde, mr=mr, jade=jade, jfde=jfde, jmr=jmr)


def aggregate_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean over instances, field by field."""
    if not reports:
        raise ValueError("no reports to aggregate")
    return MetricReport(
        ade=float(np.mean([r.ade for r in reports])),
        fde=float(np.mean([r.fde for r in reports])),
        mr=float(np.mean([r.mr for r in reports])),
        jade=float(np.mean([r.jade for r in reports])),
        jfde=float(np.mean([r.jfde for r in reports])),
        jmr=float(np.mean([r.jmr for r in reports])),
    )


_CSV_FIELDS = ("instance", "ade", "fde", "mr", "jade", "jfde", "jmr")


def export_reports(reports: Sequence[MetricReport], json_path=None, csv_path=None, ids=None) -> dict:
    """Write per-instance rows plus an aggregate row as JSON and/or CSV."""
    ids = list(ids) if ids is not None else list(range(len(reports)))
    agg = aggregate_reports(reports)
    payload = {
        "instances": [{"instance": i, **r.as_dict()} for i, r in zip(ids, reports)],
        "aggregate": agg.as_dict(),
    }
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_FIELDS)
            for i, r in zip(ids, reports):
                writer.writerow([i, r.ade, r.fde, r.mr, r.jade, r.jfde, r.jmr])
            writer.writerow(["aggregate", agg.ade, agg.fde, agg.mr, agg.jade, agg.jfde, agg.jmr])
    return payload
