"""Train a small denoiser for a few hundred steps and watch the loss drop.

For a full desk-scale run use the CLI instead:
  playdiff simulate --out data.jsonl --matches 48 --seed 0
  playdiff train --dataset data.jsonl --out run/ --preset S-desk --steps 5000
"""

import numpy as np

from playdiff.madit import Denoiser, init_weights, preset
from playdiff.madit.model import WindowBank
from playdiff.pitchdata import SimulatorConfig, generate_dataset, windows_from_records
from playdiff.sampler import OptimConfig, Trainer, build_schedule

records = generate_dataset(SimulatorConfig(seed=3, half_duration_s=120.0), 4, 3)
pairs = windows_from_records(records)
cfg = preset("S-desk")
bank = WindowBank(pairs, cfg)
trainer = Trainer(Denoiser(cfg, init_weights(cfg, 0)), build_schedule(20), OptimConfig(lr=3e-4), seed=0)

rng = np.random.default_rng(0)
for step in range(400):
    idx = rng.integers(0, len(bank), size=32)
    loss = trainer.noise_step(*bank.take(idx))
    if step % 50 == 0:
        print(f"step {step:4d}  eps-mse {loss:.4f}")
print(f"final {np.mean(trainer.history[-20:]):.4f} (from {np.mean(trainer.history[:5]):.4f})")
