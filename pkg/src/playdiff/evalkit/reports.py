"""Guidance-score reporting for generated samples vs the reference play."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np


def guidance_report(hook, samples_meters, reference_meters=None, cond=None) -> dict:
    """Objective values for each sample and (optionally) the ground truth.

    ``hook`` is any guidance hook exposing ``score_meters``; samples are
    (N, A, H, 2) in meters.  Returns {"samples": [...], "reference": float|None}.
    """
    samples_meters = np.asarray(samples_meters)
    scores = [float(hook.score_meters(samples_meters[i], cond)) for i in range(samples_meters.shape[0])]
    ref = None
    if reference_meters is not None:
        ref = float(hook.score_meters(np.asarray(reference_meters), cond))
    return {"samples": scores, "reference": ref}
