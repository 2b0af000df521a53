"""Generate a small synthetic match dataset and look at what's inside."""

import collections

from playdiff.pitchdata import SimulatorConfig, generate_dataset, split_dataset, windows_from_records

records = generate_dataset(SimulatorConfig(seed=7, half_duration_s=120.0), n_matches=4, master_seed=7)
print(f"{len(records)} events from 4 matches")
print("action mix:", dict(collections.Counter(r.action for r in records)))
print("goal events:", sum(1 for r in records if abs(r.home_reward) == 1.0))

train, test = split_dataset(records, 0.2, mode="random", seed=0)
pairs = windows_from_records(train)
w, rec = pairs[0]
print(f"first window: {w.valid_length()} valid frames, roles attackers/defenders/ball = "
      f"{(w.roles == 0).sum()}/{(w.roles == 1).sum()}/{(w.roles == 2).sum()}")
print("normalized range:", float(w.positions.min()), float(w.positions.max()))
