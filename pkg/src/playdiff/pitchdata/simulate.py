"""Seeded synthetic match simulator emitting schema-complete event records.

Stands in for a proprietary tracking corpus: 22 players follow
velocity-relaxation dynamics toward a blend of formation anchor and ball
position, the ball is carried by the nearest controlling player or flies
in straight lines during passes/shots, and events are sampled from a
small action set at a configurable rate.  Episodes terminate on goals,
half ends, or the ball staying out of play for more than 30 seconds.

Everything is driven by one master seed; per-match seeds derive from it
via splitmix64, so matches are independent and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pitch as P
from .records import EventRecord
from .rewards import compute_reward
from .windows import Episode

FPS = 10
DT = 1.0 / FPS
OUT_OF_PLAY_LIMIT = 30.0  # seconds


def splitmix64(x: int) -> int:
    """One splitmix64 step; used to derive independent sub-seeds."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


# 4-4-2 anchor grid for the team attacking rightward, meters.
_FORMATION = np.array(
    [
        [6.0, 34.0],
        [25.0, 10.0], [25.0, 26.0], [25.0, 42.0], [25.0, 58.0],
        [45.0, 12.0], [45.0, 28.0], [45.0, 44.0], [45.0, 60.0],
        [68.0, 24.0], [68.0, 44.0],
    ]
)


@dataclass
class SimulatorConfig:
    fps: int = FPS
    formation: np.ndarray = field(default_factory=lambda: _FORMATION.copy())
    relax_rate: float = 1.2  # 1/s pull toward the target point
    ball_attraction: float = 0.35  # blend weight of ball vs anchor
    max_speed: float = 8.0  # m/s, capped per frame
    event_rate: float = 0.7  # events per second
    pass_speed: float = 14.0  # m/s
    goal_mouth_half_width: float = 3.66  # meters
    noise_scale: float = 0.6  # m/s^2-ish velocity jitter
    half_duration_s: float = 240.0
    halves: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.max_speed > 12.0:
            raise ValueError("max_speed must be <= 12 m/s")
        for name in ("relax_rate", "ball_attraction", "event_rate", "pass_speed", "goal_mouth_half_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class _MatchState:
    """Mutable per-match simulation state (raw coords, home attacks right)."""

    def __init__(self, cfg: SimulatorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        home = cfg.formation
        away = np.array([[P.PITCH_LENGTH, P.PITCH_WIDTH]]) - cfg.formation
        self.anchors = np.vstack([home, away])  # (22, 2)
        self.pos = self.anchors + rng.normal(scale=1.5, size=(22, 2))
        self.vel = np.zeros((22, 2))
        self.ball = np.array([P.HALF_LENGTH, P.HALF_WIDTH])
        self.possession = int(rng.integers(0, 2))  # 0 home, 1 away
        self.carrier: Optional[int] = None
        self.flight: Optional[dict] = None  # {"vel": (2,), "frames_left": int}
        self.last_flight: Optional[dict] = None  # most recent resolved flight
        self.out_timer = 0.0
        self.out_delay = 0.0
        self.score = [0, 0]
        self.possession_start = 0.0
        self.frames: list = []  # (23, 2) per frame
        self.t = 0.0
        self._claim_carrier()

    # -- helpers --------------------------------------------------------
    def team_slice(self, team: int) -> slice:
        return slice(0, 11) if team == 0 else slice(11, 22)

    def _claim_carrier(self):
        sl = self.team_slice(self.possession)
        d = np.linalg.norm(self.pos[sl] - self.ball, axis=1)
        self.carrier = sl.start + int(np.argmin(d))

    def goal_x(self, team: int) -> float:
        return P.PITCH_LENGTH if team == 0 else 0.0

    def snapshot(self) -> np.ndarray:
        frame = np.empty((23, 2))
        frame[:22] = self.pos
        frame[22] = self.ball
        return P.snap_to_grid(frame)

    # -- dynamics -------------------------------------------------------
    def step_players(self):
        cfg = self.cfg
        target = (1.0 - cfg.ball_attraction) * self.anchors + cfg.ball_attraction * self.ball
        desired = cfg.relax_rate * (target - self.pos)
        self.vel += 2.0 * DT * (desired - self.vel)
        self.vel += self.rng.normal(scale=cfg.noise_scale * DT ** 0.5, size=(22, 2))
        speed = np.linalg.norm(self.vel, axis=1, keepdims=True)
        # margin absorbs the storage-grid rounding so per-frame displacement
        # stays <= max_speed / fps even after snapping
        factor = np.minimum(1.0, (cfg.max_speed - 1e-4) / np.maximum(speed, 1e-9))
        self.vel *= factor
        self.pos += self.vel * DT
        np.clip(self.pos[:, 0], 0.0, P.PITCH_LENGTH, out=self.pos[:, 0])
        np.clip(self.pos[:, 1], 0.0, P.PITCH_WIDTH, out=self.pos[:, 1])

    def step_ball(self):
        """Advance the ball one frame. Returns 'goal' | 'out' | None."""
        if self.flight is not None:
            self.ball = self.ball + self.flight["vel"] * DT
            self.flight["frames_left"] -= 1
            x, y = self.ball
            goal_x = self.goal_x(self.flight["team"])
            crossed = (x >= goal_x) if goal_x > 0 else (x <= goal_x)
            if self.flight.get("shot") and crossed and abs(y - P.HALF_WIDTH) <= self.cfg.goal_mouth_half_width:
                return "goal"
            if not (0.0 <= x <= P.PITCH_LENGTH and 0.0 <= y <= P.PITCH_WIDTH):
                return "out"
            if self.flight["frames_left"] <= 0:
                self.last_flight = self.flight
                self.flight = None
                self._claim_carrier()
            return None
        if self.carrier is not None:
            self.ball = self.pos[self.carrier].copy()
        return None


def _sample_action(state: _MatchState, rng: np.random.Generator) -> str:
    x = state.ball[0] if state.possession == 0 else P.PITCH_LENGTH - state.ball[0]
    y = state.ball[1]
    in_box = x > 88.0 and abs(y - P.HALF_WIDTH) < 20.0
    attempt_w = 0.9 if in_box else (0.35 if x > 70.0 else 0.02)
    weights = np.array([0.5, 0.2, 0.07, attempt_w, 0.06])
    weights /= weights.sum()
    return P.SIMULATED_ACTIONS[int(rng.choice(5, p=weights))]


def simulate_match(cfg: SimulatorConfig, game_id: int = 0, seed: Optional[int] = None) -> list:
    """Simulate one match; returns the list of completed Episodes."""
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(np.random.PCG64(splitmix64(seed)))
    episodes: list = []
    event_counter = 0

    for half in range(cfg.halves):
        state = _MatchState(cfg, rng)
        frames_per_half = int(cfg.half_duration_s * cfg.fps)
        episode_records: list = []
        episode_id = len(episodes)
        pending: Optional[dict] = None  # event info awaiting its trajectory
        next_event_frame = max(10, int(rng.exponential(1.0 / cfg.event_rate) * cfg.fps))

        def flush(done: bool, rewards=(0.0, 0.0), frame_idx: int = 0):
            """Finalize the pending record with its observed trajectory."""
            nonlocal pending, event_counter
            if pending is None:
                return
            if rewards == (0.0, 0.0) and "bonus" in pending:
                rewards = pending["bonus"]
            start = pending["frame"]
            traj = np.asarray(state.frames[start + 1 : frame_idx + 1])
            if traj.shape[0] < 1:
                pending = None
                return
            traj = traj[:64]
            dest = state.frames[frame_idx][22]
            flip = pending["possession"] == 1
            ctx = np.asarray(state.frames[start - 9 : start + 1])
            if flip:
                ctx = P.flip_to_rightward(ctx, "left")
                traj = P.flip_to_rightward(traj, "left")
                dest = P.flip_to_rightward(dest, "left")
            rec = EventRecord(
                event_metadata={
                    "game_id": int(game_id),
                    "event_id": int(event_counter),
                    "episode_id": int(episode_id),
                },
                global_feature={
                    "goal_difference": float(pending["goal_diff"]),
                    "outcome": float(pending["outcome"]),
                    "possession_length": float(pending["possession_length"]),
                    "controlling_team": float(1 - pending["possession"]),
                },
                time_to_event=round((frame_idx - start) * DT, 6),
                action=pending["action"],
                action_destination=(float(dest[0]), float(dest[1])),
                is_home_action=int(pending["actor_team"] == 0),
                is_attacking_action=int(pending["action"] in ("Pass", "Ball touch", "Attempt")),
                home_reward=float(rewards[0]),
                away_reward=float(rewards[1]),
                done=bool(done),
                context_positions=ctx,
                context_features=pending["features"],
                trajectory_positions=traj,
                trajectory_features=pending["features"],
            )
            episode_records.append(rec.validate())
            event_counter += 1
            pending = None

        def agent_features(actor: Optional[int]) -> np.ndarray:
            feats = np.zeros((23, 4))
            feats[:11, 0] = 1.0  # side: home
            feats[11:22, 0] = 0.0
            feats[22, 0] = -1.0
            feats[:11, 1] = np.arange(1, 12)
            feats[11:22, 1] = np.arange(1, 12)
            feats[:, 2] = 1.0  # visibility
            if actor is not None:
                feats[actor, 3] = 1.0  # involvement
            return feats

        def end_episode(cause: str, rewards=(0.0, 0.0), frame_idx: int = 0):
            nonlocal episode_records, episode_id
            flush(done=True, rewards=rewards, frame_idx=frame_idx)
            if episode_records:
                if not episode_records[-1].done:
                    episode_records[-1].done = True
                episodes.append(Episode(episode_records, cause))
                episode_id = len(episodes)
            episode_records = []

        for f in range(frames_per_half):
            state.step_players()
            outcome = state.step_ball()
            np.clip(state.ball, [-P.BOUNDS_SLACK, -P.BOUNDS_SLACK],
                    [P.PITCH_LENGTH + P.BOUNDS_SLACK, P.PITCH_WIDTH + P.BOUNDS_SLACK], out=state.ball)
            state.frames.append(state.snapshot())
            state.t = f * DT

            if outcome == "goal":
                scorer = state.flight["team"]
                state.score[scorer] += 1
                rewards = compute_reward("goal", "home" if scorer == 0 else "away", 1.0)
                end_episode("goal", rewards, f)
                # kickoff reset
                state.pos = state.anchors + rng.normal(scale=1.5, size=(22, 2))
                state.vel[:] = 0.0
                state.ball = np.array([P.HALF_LENGTH, P.HALF_WIDTH])
                state.flight = None
                state.possession = 1 - scorer
                state.possession_start = state.t
                state._claim_carrier()
                next_event_frame = f + max(10, int(rng.exponential(1.0 / cfg.event_rate) * cfg.fps))
                continue

            if outcome == "out":
                fl = state.flight
                state.flight = None
                state.carrier = None
                state.out_timer = 0.0
                state.out_delay = float(rng.exponential(6.0))
                if rng.random() < 0.03:
                    state.out_delay = OUT_OF_PLAY_LIMIT + 5.0
                if (
                    fl is not None and fl.get("shot") and fl.get("range", 99.0) <= 30.0
                    and pending is not None and rng.random() < 0.55
                ):
                    pending["bonus"] = compute_reward("big_chance", "home" if fl["team"] == 0 else "away")
            elif state.last_flight is not None:
                fl = state.last_flight
                state.last_flight = None
                if (
                    fl.get("shot") and fl.get("range", 99.0) <= 30.0
                    and pending is not None and rng.random() < 0.55
                ):
                    pending["bonus"] = compute_reward("big_chance", "home" if fl["team"] == 0 else "away")

            if state.carrier is None and state.flight is None:
                # ball out of play; wait for the retrieval delay
                state.out_timer += DT
                if state.out_timer > OUT_OF_PLAY_LIMIT:
                    end_episode("ball_out", (0.0, 0.0), f)
                    state.out_timer = 0.0
                    state.out_delay = float(rng.exponential(4.0))
                if state.out_timer >= state.out_delay:
                    state.possession = 1 - state.possession
                    state.possession_start = state.t
                    np.clip(state.ball, [0.5, 0.5], [P.PITCH_LENGTH - 0.5, P.PITCH_WIDTH - 0.5], out=state.ball)
                    state._claim_carrier()
                continue

            if f >= next_event_frame and state.carrier is not None and f >= 10:
                action = _sample_action(state, rng)
                actor_team = state.possession
                flush(done=False, frame_idx=f)
                pending = {
                    "frame": f,
                    "action": action,
                    "actor_team": actor_team,
                    "possession": state.possession,
                    "goal_diff": state.score[0] - state.score[1],
                    "outcome": 1.0,
                    "possession_length": state.t - state.possession_start,
                    "features": agent_features(state.carrier),
                }
                _resolve_action(state, action, rng)
                if action == "Interception":
                    pending["actor_team"] = state.possession
                    pending["outcome"] = 0.0
                gap = max(6, int(rng.exponential(1.0 / cfg.event_rate) * cfg.fps))
                next_event_frame = f + gap

        end_episode("half_end", (0.0, 0.0), frames_per_half - 1)
    return episodes


def _resolve_action(state: _MatchState, action: str, rng: np.random.Generator):
    cfg = state.cfg
    team = state.possession
    sl = state.team_slice(team)
    if action == "Pass":
        mates = np.arange(sl.start, sl.stop)
        mates = mates[mates != state.carrier]
        forward = state.pos[mates, 0] if team == 0 else -state.pos[mates, 0]
        w = np.exp(forward / 40.0)
        w /= w.sum()
        receiver = int(rng.choice(mates, p=w))
        target = state.pos[receiver] + rng.normal(scale=1.0, size=2)
        delta = target - state.ball
        dist = max(float(np.linalg.norm(delta)), 1e-6)
        vel = delta / dist * cfg.pass_speed
        state.flight = {"vel": vel, "frames_left": max(1, int(dist / cfg.pass_speed * FPS)), "team": team, "shot": False}
        state.carrier = None
    elif action == "Ball touch":
        push = rng.normal(scale=0.8, size=2)
        state.ball = state.ball + push
        np.clip(state.ball, [0.0, 0.0], [P.PITCH_LENGTH, P.PITCH_WIDTH], out=state.ball)
    elif action == "Clearance":
        direction = np.array([1.0, 0.0]) if team == 0 else np.array([-1.0, 0.0])
        direction = direction + rng.normal(scale=0.5, size=2)
        direction /= max(np.linalg.norm(direction), 1e-6)
        vel = direction * cfg.pass_speed * 1.4
        state.flight = {"vel": vel, "frames_left": int(rng.integers(18, 36)), "team": team, "shot": False}
        state.carrier = None
    elif action == "Attempt":
        goal = np.array([state.goal_x(team), P.HALF_WIDTH])
        range_m = float(np.linalg.norm(goal - state.ball))
        # close shots are accurate, long shots scatter
        aim_sigma = cfg.goal_mouth_half_width * (0.35 + range_m / 40.0)
        aim = goal + np.array([0.0, rng.normal(scale=aim_sigma)])
        delta = aim - state.ball
        dist = max(float(np.linalg.norm(delta)), 1e-6)
        vel = delta / dist * cfg.pass_speed * 1.4
        state.flight = {"vel": vel, "frames_left": int(dist / (cfg.pass_speed * 1.4) * FPS) + 10,
                        "team": team, "shot": True, "range": range_m}
        state.carrier = None
    elif action == "Interception":
        opp = state.team_slice(1 - team)
        d = np.linalg.norm(state.pos[opp] - state.ball, axis=1)
        state.possession = 1 - team
        state.carrier = opp.start + int(np.argmin(d))
        state.possession_start = state.t
        state.ball = state.pos[state.carrier].copy()
    else:  # pragma: no cover
        raise ValueError(f"unknown simulated action {action!r}")


def generate_dataset(cfg: SimulatorConfig, n_matches: int, master_seed: Optional[int] = None):
    """Simulate ``n_matches`` independent matches; yields EventRecords."""
    master = cfg.seed if master_seed is None else master_seed
    records = []
    for m in range(n_matches):
        for ep in simulate_match(cfg, game_id=m, seed=splitmix64(master + m)):
            records.extend(ep.records)
    return records
