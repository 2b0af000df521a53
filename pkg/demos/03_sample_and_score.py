"""Sample trajectories from a fresh model and evaluate displacement metrics."""

import numpy as np

from playdiff.evalkit import displacement_metrics
from playdiff.madit import Denoiser, condition_from_record, init_weights, preset
from playdiff.pitchdata import SimulatorConfig, generate_dataset, windows_from_records
from playdiff.sampler import SamplerConfig, build_schedule, sample

records = generate_dataset(SimulatorConfig(seed=5, half_duration_s=90.0), 2, 5)
window, record = windows_from_records(records)[10]

cfg = preset("S-desk")
den = Denoiser(cfg, init_weights(cfg, 0))  # untrained: expect poor metrics
cond = condition_from_record(window, record, cfg)
meters, _ = sample(cond, den, build_schedule(20), SamplerConfig(n_samples=20, seed=1))
print("sampled", meters.shape, "meters; ball stays in bounds:", float(meters[..., 0].max()), "<= 110")

report = displacement_metrics(meters, window.positions_meters(), window.validity)
print(f"best-of-20 JADE {report.jade:.2f} m, JFDE {report.jfde:.2f} m, JMR {report.jmr:.0f}%")
