"""Steer generation with rule objectives and compare guidance scores."""

import numpy as np

from playdiff.madit import Denoiser, condition_from_record, init_weights, preset
from playdiff.objectives import make_hook, objective_presets
from playdiff.pitchdata import SimulatorConfig, generate_dataset, windows_from_records
from playdiff.sampler import SamplerConfig, build_schedule, sample

records = generate_dataset(SimulatorConfig(seed=11, half_duration_s=90.0), 2, 11)
window, record = windows_from_records(records)[5]

cfg = preset("S-desk")
den = Denoiser(cfg, init_weights(cfg, 0))
sched = build_schedule(20)
cond = condition_from_record(window, record, cfg)
hook = make_hook(objective_presets()["attacking_rules"], "attacking", den, sched)

base_cfg = SamplerConfig(n_samples=8, seed=2, guided_team="attacking", opponent_mode="recorded")
unguided, _ = sample(cond, den, sched, base_cfg, reference=window.positions)
guided_cfg = SamplerConfig(n_samples=8, seed=2, guidance_scale=1.0, guided_team="attacking", opponent_mode="recorded")
guided, scores = sample(cond, den, sched, guided_cfg, reference=window.positions, hook=hook)

unguided_scores = [hook.score_meters(unguided[i], cond) for i in range(8)]
print("mean guidance score unguided:", np.mean(unguided_scores))
print("mean guidance score guided:  ", np.mean(scores))
print("ground truth score:          ", hook.score_meters(window.positions_meters(), cond))
