"""Value model: Monte Carlo return regression on attacking-team rewards.

Returns are discounted event-level sums within each episode, expressed
from the perspective of the team attacking at that event; the defending
value is the exact negative.  The model shares the denoiser backbone with
a scalar head and is trained on clean windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..madit.config import ModelConfig
from ..madit.model import Denoiser, batch_from_windows
from ..madit.weights import init_weights
from ..pitchdata.rewards import compute_returns
from ..pitchdata.windows import Episode
from ..sampler.schedule import NoiseSchedule
from ..sampler.train import OptimConfig, Trainer


@dataclass
class ValueModelSpec:
    config: ModelConfig
    gamma: float = 0.95
    steps: int = 1500
    batch: int = 64
    lr: float = 3e-4
    seed: int = 0

    def __post_init__(self):
        if self.config.head != "scalar-value":
            raise ValueError("value model needs a scalar-value head")


def attacking_returns(episodes: Sequence[Episode], gamma: float = 0.95):
    """Per-record discounted returns from the attacking team's perspective.

    Home-perspective returns are computed once per episode; each event's
    return is sign-flipped when the controlling team is the away side.
    Returns a list aligned with the concatenated episode records.
    """
    out = []
    for ep in episodes:
        home = compute_returns([r.home_reward for r in ep.records], gamma)
        for rec, hr in zip(ep.records, home):
            sign = 1.0 if rec.global_feature["controlling_team"] == 1.0 else -1.0
            out.append(sign * hr)
    return out


def train_value(
    pairs,
    targets,
    spec: ValueModelSpec,
    schedule: NoiseSchedule,
    rng: np.random.Generator | None = None,
) -> Tuple[Denoiser, list]:
    """Regress the scalar head onto Monte Carlo returns over clean windows.

    ``pairs`` are (window, record) tuples; ``targets`` the aligned returns.
    Returns the EMA model and the loss history.
    """
    rng = rng or np.random.default_rng(spec.seed)
    targets = np.asarray(targets, dtype=np.float64)
    if len(pairs) != len(targets):
        raise ValueError("pairs and targets must align")
    model = Denoiser(spec.config, init_weights(spec.config, spec.seed))
    trainer = Trainer(model, schedule, OptimConfig(lr=spec.lr), seed=spec.seed)
    from ..madit.model import WindowBank

    bank = WindowBank(pairs, spec.config)
    batch = min(spec.batch, len(bank))
    for step in range(spec.steps):
        idx = rng.integers(0, len(bank), size=batch)
        pos, _, cond = bank.take(idx)
        trainer.value_step(pos, targets[idx], cond)
    return trainer.ema_denoiser(), trainer.history
