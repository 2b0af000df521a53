"""Pitch geometry, coordinate normalization and orientation convention.

All raw positions are meters on a 105 x 68 pitch with the origin at the
bottom-left corner flag.  Records are stored in the rightward-attacking
convention: the team in possession always attacks the goal centered at
(105, 34).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PITCH_LENGTH = 105.0
PITCH_WIDTH = 68.0
HALF_LENGTH = PITCH_LENGTH / 2.0  # 52.5
HALF_WIDTH = PITCH_WIDTH / 2.0  # 34.0

# Out-of-bounds slack for ball flight, meters.  Kept at 3 so normalized
# coordinates stay inside [-1.1, 1.1].
BOUNDS_SLACK = 3.0
RAW_BOUNDS_X = (-5.0, 110.0)
RAW_BOUNDS_Y = (-5.0, 73.0)

# All stored positions snap to this binary grid (~1 micrometer).  On the
# grid, 105 - x and 68 - y are exactly representable, so the orientation
# flip is an exact involution in IEEE arithmetic.
POSITION_GRID = 2.0 ** -20


def snap_to_grid(positions) -> np.ndarray:
    """Round coordinates to the storage grid (exact power-of-two scaling)."""
    p = np.asarray(positions, dtype=np.float64)
    return np.rint(p * (1.0 / POSITION_GRID)) * POSITION_GRID

N_PLAYERS = 22
N_AGENTS = 23  # 22 players + ball
BALL_INDEX = 22

#: Unified action vocabulary (30 labels).  The synthetic simulator emits
#: only the first five; the rest appear in real-world event feeds.
ACTION_LABELS = (
    "Pass",
    "Ball touch",
    "Clearance",
    "Attempt",
    "Interception",
    "Tackle",
    "Take on",
    "Save",
    "Recovery",
    "Blocked pass",
    "Corner",
    "Cross",
    "Throw in",
    "Goal kick",
    "Free kick",
    "Penalty",
    "Shot",
    "Header",
    "Dribble",
    "Foul",
    "Offside",
    "Goal",
    "Own goal",
    "Keeper pickup",
    "Punch",
    "Claim",
    "Block",
    "Challenge",
    "Dispossessed",
    "Error",
)
ACTION_INDEX = {label: i for i, label in enumerate(ACTION_LABELS)}

SIMULATED_ACTIONS = ("Pass", "Ball touch", "Clearance", "Attempt", "Interception")


@dataclass(frozen=True)
class PitchSpec:
    """Standardized pitch: 105 x 68 m, attacking goal centered at (105, 34)."""

    length: float = PITCH_LENGTH
    width: float = PITCH_WIDTH
    goal_center: tuple = (PITCH_LENGTH, HALF_WIDTH)

    def in_bounds(self, positions) -> bool:
        """True when all raw positions fall inside the slack box."""
        p = np.asarray(positions)
        x, y = p[..., 0], p[..., 1]
        return bool(
            np.all(x >= RAW_BOUNDS_X[0]) and np.all(x <= RAW_BOUNDS_X[1])
            and np.all(y >= RAW_BOUNDS_Y[0]) and np.all(y <= RAW_BOUNDS_Y[1])
        )


def normalize(positions, inverse: bool = False) -> np.ndarray:
    """Map meters to [-1, 1] via the half-pitch scale factors (or back).

    Forward: (x, y) -> ((x - 52.5) / 52.5, (y - 34) / 34).  The inverse is
    the exact affine round-trip.
    """
    p = np.asarray(positions, dtype=np.float64)
    out = np.empty_like(p)
    if inverse:
        out[..., 0] = p[..., 0] * HALF_LENGTH + HALF_LENGTH
        out[..., 1] = p[..., 1] * HALF_WIDTH + HALF_WIDTH
    else:
        out[..., 0] = (p[..., 0] - HALF_LENGTH) / HALF_LENGTH
        out[..., 1] = (p[..., 1] - HALF_WIDTH) / HALF_WIDTH
    return out


def flip_to_rightward(positions, attacking_side: str) -> np.ndarray:
    """Rotate raw-meter coordinates so the attacking goal sits at (105, 34).

    ``attacking_side`` is the side whose goal the attacking team shoots at
    before flipping: 'right' leaves coordinates unchanged, 'left' maps
    (x, y) -> (105 - x, 68 - y).  On grid-snapped coordinates (every stored
    position; see ``snap_to_grid``) applying the flip twice is bit-exact.
    """
    p = np.asarray(positions, dtype=np.float64)
    if attacking_side == "right":
        return p.copy()
    if attacking_side != "left":
        raise ValueError(f"attacking_side must be 'left' or 'right', got {attacking_side!r}")
    out = np.empty_like(p)
    out[..., 0] = PITCH_LENGTH - p[..., 0]
    out[..., 1] = PITCH_WIDTH - p[..., 1]
    return out
