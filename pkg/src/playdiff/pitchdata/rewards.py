"""Reward assignment and discounted return computation."""

from __future__ import annotations

import numpy as np

#: Outcome type -> base reward magnitude for the credited team.
REWARD_TABLE = {
    "goal": 1.0,
    "big_chance": 0.75,
    "penalty_earned": 0.75,
    "none": 0.0,
}


def compute_reward(outcome_type: str, credited_team: str = "home", importance: float = 1.0):
    """(home_reward, away_reward) for an event outcome.

    Goals carry the importance modifier; big chances and earned penalties
    are worth 0.75; anything else is 0.  The opposing team always receives
    the exact negative.
    """
    if outcome_type not in REWARD_TABLE:
        raise ValueError(f"unknown outcome type {outcome_type!r}")
    if credited_team not in ("home", "away"):
        raise ValueError(f"credited_team must be 'home' or 'away', got {credited_team!r}")
    base = REWARD_TABLE[outcome_type]
    if outcome_type == "goal":
        base *= importance
    signed = base if credited_team == "home" else -base
    return signed, -signed


def compute_returns(rewards, gamma: float = 0.95) -> np.ndarray:
    """Discounted cumulative rewards over one episode's event sequence.

    R_t = sum_{i >= t} gamma^(i - t) * r_i.  Callers pass one episode at a
    time; returns never leak across episodes.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for i in range(len(r) - 1, -1, -1):
        acc = r[i] + gamma * acc
        out[i] = acc
    return out
