"""Dataset schema, coordinate conventions, rewards, windowing and the synthetic simulator."""

from .pitch import (
    ACTION_INDEX,
    ACTION_LABELS,
    BALL_INDEX,
    N_AGENTS,
    N_PLAYERS,
    PitchSpec,
    flip_to_rightward,
    normalize,
    snap_to_grid,
)
from .records import (
    EventRecord,
    RecordError,
    decode_record,
    encode_record,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .rewards import compute_returns, compute_reward
from .simulate import SimulatorConfig, generate_dataset, simulate_match, splitmix64
from .windows import (
    CONTEXT_LEN,
    HORIZON,
    Episode,
    TrajectoryWindow,
    make_window,
    window_from_record,
    windows_from_records,
)
