"""Fixed-horizon trajectory windows cut around annotated events.

A window covers H = 64 frames of all 23 agents: the first H_c = 10 frames
are the observed context ending at the event, the remaining 54 are the
post-event trajectory, truncated or padded.  Padding repeats the last
valid position; the validity mask excludes padded frames from losses and
metrics.  Agents are reordered so rows 0-10 are the attacking
(controlling) team, 11-21 the defenders and 22 the ball.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pitch import BALL_INDEX, N_AGENTS, normalize
from .records import EventRecord

HORIZON = 64
CONTEXT_LEN = 10

ROLE_ATTACKER, ROLE_DEFENDER, ROLE_BALL = 0, 1, 2


@dataclass
class Episode:
    """Ordered event records ending with exactly one ``done`` record."""

    records: list
    termination: str  # goal | half_end | ball_out

    def __post_init__(self):
        if self.termination not in ("goal", "half_end", "ball_out"):
            raise ValueError(f"unknown termination cause {self.termination!r}")
        flags = [bool(r.done) for r in self.records]
        if flags and (sum(flags) != 1 or not flags[-1]):
            raise ValueError("exactly the final record may have done=True")


@dataclass
class TrajectoryWindow:
    """Normalized joint trajectories of 23 agents over 64 frames."""

    positions: np.ndarray  # (23, 64, 2) in [-1.1, 1.1]
    validity: np.ndarray  # (23, 64) float 0/1
    roles: np.ndarray  # (23,) int: 0 attacker, 1 defender, 2 ball
    ball_mode: str = "predictive"  # predictive | conditional
    context_len: int = CONTEXT_LEN

    def positions_meters(self) -> np.ndarray:
        return normalize(self.positions, inverse=True)

    def valid_length(self) -> int:
        return int(self.validity[0].sum())


def agent_order(controlling_team: int) -> np.ndarray:
    """Record rows (home 0-10, away 11-21, ball 22) -> window rows."""
    home = np.arange(0, 11)
    away = np.arange(11, 22)
    first, second = (home, away) if controlling_team == 1 else (away, home)
    return np.concatenate([first, second, [BALL_INDEX]])


def make_window(episode: Episode, event_index: int, ball_mode: str = "predictive") -> TrajectoryWindow:
    """Cut the fixed 64-frame window around one event of an episode."""
    return window_from_record(episode.records[event_index], ball_mode)


def window_from_record(rec: EventRecord, ball_mode: str = "predictive") -> TrajectoryWindow:
    if rec.context_positions.shape[0] < CONTEXT_LEN:
        raise ValueError(
            f"window rejected: {rec.context_positions.shape[0]} context frames, need {CONTEXT_LEN}"
        )
    traj = rec.trajectory_positions
    if traj.shape[0] < 1:
        raise ValueError("window rejected: event has no trajectory frames")

    order = agent_order(int(rec.global_feature["controlling_team"]))
    context = rec.context_positions[:, order, :]  # (10, 23, 2)
    future = traj[: HORIZON - CONTEXT_LEN, order, :]  # (<=54, 23, 2)

    n_valid = CONTEXT_LEN + future.shape[0]
    frames = np.empty((HORIZON, N_AGENTS, 2), dtype=np.float64)
    frames[:CONTEXT_LEN] = context
    frames[CONTEXT_LEN:n_valid] = future
    frames[n_valid:] = frames[n_valid - 1]  # repeat last valid position

    validity = np.zeros((N_AGENTS, HORIZON), dtype=np.float64)
    validity[:, :n_valid] = 1.0

    roles = np.full(N_AGENTS, ROLE_DEFENDER, dtype=np.int64)
    roles[:11] = ROLE_ATTACKER
    roles[BALL_INDEX] = ROLE_BALL

    return TrajectoryWindow(
        positions=np.ascontiguousarray(normalize(frames).transpose(1, 0, 2)),
        validity=validity,
        roles=roles,
        ball_mode=ball_mode,
    )


def windows_from_records(records: Sequence[EventRecord], ball_mode: str = "predictive"):
    """Build (window, record) pairs, skipping events that fail the contract."""
    out = []
    for rec in records:
        try:
            out.append((window_from_record(rec, ball_mode), rec))
        except ValueError:
            continue
    return out
