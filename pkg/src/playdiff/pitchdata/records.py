"""Event records, JSON-lines persistence and dataset splits.

One event per line, UTF-8 JSON, field names as in the dataset schema doc
(docs/dataset-schema.md).  Agent axis order everywhere: home players
0-10, away players 11-21, ball 22.  Positions are meters in the
rightward-attacking convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .pitch import ACTION_INDEX, N_AGENTS


class RecordError(ValueError):
    """A record failed schema validation; message carries the field path."""


@dataclass
class EventRecord:
    event_metadata: dict
    global_feature: dict
    time_to_event: float
    action: str
    action_destination: tuple
    is_home_action: int
    is_attacking_action: int
    home_reward: float
    away_reward: float
    done: bool
    context_positions: np.ndarray  # (10, 23, 2) meters
    context_features: np.ndarray  # (23, 4): side, jersey, visibility, involvement
    trajectory_positions: np.ndarray  # (L, 23, 2) meters, 1 <= L <= 64
    trajectory_features: np.ndarray  # (23, 4)

    def validate(self) -> "EventRecord":
        if self.action not in ACTION_INDEX:
            raise RecordError(f"action: unknown label {self.action!r}")
        if self.context_positions.shape != (10, N_AGENTS, 2):
            raise RecordError(
                f"context_positions: expected (10, {N_AGENTS}, 2), got {self.context_positions.shape}"
            )
        L = self.trajectory_positions.shape[0]
        if self.trajectory_positions.shape != (L, N_AGENTS, 2) or not 1 <= L <= 64:
            raise RecordError(
                f"trajectory_positions: expected (1..64, {N_AGENTS}, 2), got {self.trajectory_positions.shape}"
            )
        if self.home_reward != -self.away_reward:
            raise RecordError("home_reward: must equal -away_reward")
        for name, arr in (
            ("context_positions", self.context_positions),
            ("trajectory_positions", self.trajectory_positions),
        ):
            if not np.all(np.isfinite(arr)):
                raise RecordError(f"{name}: non-finite value")
        return self


_FIELDS = (
    "event_metadata",
    "global_feature",
    "time_to_event",
    "action",
    "action_destination",
    "is_home_action",
    "is_attacking_action",
    "home_reward",
    "away_reward",
    "done",
    "context_positions",
    "context_features",
    "trajectory_positions",
    "trajectory_features",
)

_METADATA_KEYS = ("game_id", "event_id", "episode_id")
_GLOBAL_KEYS = ("goal_difference", "outcome", "possession_length", "controlling_team")


def encode_record(rec: EventRecord) -> str:
    """Serialize one record to a single JSON line."""
    obj = {
        "event_metadata": {k: rec.event_metadata[k] for k in _METADATA_KEYS},
        "global_feature": {k: rec.global_feature[k] for k in _GLOBAL_KEYS},
        "time_to_event": rec.time_to_event,
        "action": rec.action,
        "action_destination": list(rec.action_destination),
        "is_home_action": int(rec.is_home_action),
        "is_attacking_action": int(rec.is_attacking_action),
        "home_reward": rec.home_reward,
        "away_reward": rec.away_reward,
        "done": bool(rec.done),
        "context_positions": rec.context_positions.tolist(),
        "context_features": rec.context_features.tolist(),
        "trajectory_positions": rec.trajectory_positions.tolist(),
        "trajectory_features": rec.trajectory_features.tolist(),
    }
    return json.dumps(obj, separators=(",", ":"))


def _require(obj: dict, key: str, line_no):
    if key not in obj:
        where = f" (line {line_no})" if line_no is not None else ""
        raise RecordError(f"missing field {key!r}{where}")
    return obj[key]


def _as_array(value, key: str, line_no, expect_last=2):
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise RecordError(f"{key}: not a numeric array (line {line_no})") from None
    if arr.ndim == 0 or arr.shape[-1] != expect_last:
        raise RecordError(f"{key}: wrong arity {arr.shape} (line {line_no})")
    if not np.all(np.isfinite(arr)):
        raise RecordError(f"{key}: non-finite number (line {line_no})")
    return arr


def decode_record(line: str, line_no=None) -> EventRecord:
    """Parse one JSON line; errors carry the line number and field path."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"malformed JSON (line {line_no}): {exc}") from None
    for key in _FIELDS:
        _require(obj, key, line_no)
    meta = obj["event_metadata"]
    for key in _METADATA_KEYS:
        _require(meta, f"event_metadata.{key}" if key not in meta else key, line_no)
    glob = obj["global_feature"]
    for key in _GLOBAL_KEYS:
        if key not in glob:
            raise RecordError(f"missing field global_feature.{key} (line {line_no})")
    dest = obj["action_destination"]
    if not isinstance(dest, (list, tuple)) or len(dest) != 2:
        raise RecordError(f"action_destination: wrong arity (line {line_no})")
    for key in ("time_to_event", "home_reward", "away_reward"):
        if not np.isfinite(float(obj[key])):
            raise RecordError(f"{key}: non-finite number (line {line_no})")
    if not (np.isfinite(float(dest[0])) and np.isfinite(float(dest[1]))):
        raise RecordError(f"action_destination: non-finite number (line {line_no})")
    rec = EventRecord(
        event_metadata={k: meta[k] for k in _METADATA_KEYS},
        global_feature={k: float(glob[k]) for k in _GLOBAL_KEYS},
        time_to_event=float(obj["time_to_event"]),
        action=obj["action"],
        action_destination=(float(dest[0]), float(dest[1])),
        is_home_action=int(obj["is_home_action"]),
        is_attacking_action=int(obj["is_attacking_action"]),
        home_reward=float(obj["home_reward"]),
        away_reward=float(obj["away_reward"]),
        done=bool(obj["done"]),
        context_positions=_as_array(obj["context_positions"], "context_positions", line_no),
        context_features=_as_array(obj["context_features"], "context_features", line_no, expect_last=4),
        trajectory_positions=_as_array(obj["trajectory_positions"], "trajectory_positions", line_no),
        trajectory_features=_as_array(obj["trajectory_features"], "trajectory_features", line_no, expect_last=4),
    )
    try:
        return rec.validate()
    except RecordError as exc:
        raise RecordError(f"{exc} (line {line_no})") from None


def save_dataset(records: Iterable[EventRecord], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(encode_record(rec))
            fh.write("\n")
            n += 1
    return n


def load_dataset(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                records.append(decode_record(line, line_no=i))
    return records


def _order_key(rec: EventRecord):
    return (rec.event_metadata["game_id"], rec.event_metadata["event_id"])


def split_dataset(records, test_fraction: float, mode: str = "random", seed: int = 0):
    """Split into disjoint, exhaustive (train, test) lists.

    Random mode shuffles with the given seed; temporal mode sorts by game
    then event order and takes the trailing fraction as test.
    """
    records = list(records)
    if not records:
        raise ValueError("split_dataset: empty input")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"split_dataset: test_fraction must be in (0, 1), got {test_fraction}")
    n_test = max(1, int(round(len(records) * test_fraction)))
    if mode == "random":
        order = np.random.default_rng(seed).permutation(len(records))
        test_idx = set(order[:n_test].tolist())
        train = [r for i, r in enumerate(records) if i not in test_idx]
        test = [records[i] for i in order[:n_test]]
        return train, test
    if mode == "temporal":
        ordered = sorted(records, key=_order_key)
        return ordered[:-n_test], ordered[-n_test:]
    raise ValueError(f"split_dataset: unknown mode {mode!r}")
