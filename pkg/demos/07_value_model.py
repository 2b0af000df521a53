"""Monte Carlo returns and a quick value-model fit."""

import numpy as np

from playdiff.madit import preset
from playdiff.objectives import ValueModelSpec, attacking_returns, train_value
from playdiff.pitchdata import SimulatorConfig, simulate_match, window_from_record
from playdiff.sampler import build_schedule

episodes = []
for m in range(3):
    episodes.extend(simulate_match(SimulatorConfig(seed=20 + m, half_duration_s=120.0), m, 20 + m))
returns = attacking_returns(episodes, gamma=0.95)
records = [r for ep in episodes for r in ep.records]
print(f"{len(records)} events; return range [{min(returns):.2f}, {max(returns):.2f}]")

pairs, targets = [], []
for rec, ret in zip(records, returns):
    try:
        pairs.append((window_from_record(rec), rec))
        targets.append(ret)
    except ValueError:
        pass

spec = ValueModelSpec(config=preset("micro", head="scalar-value"), steps=600, batch=32, lr=1e-3)
model, history = train_value(pairs, targets, spec, build_schedule(20))
print(f"value loss {np.mean(history[:20]):.4f} -> {np.mean(history[-50:]):.4f} after {spec.steps} steps")
