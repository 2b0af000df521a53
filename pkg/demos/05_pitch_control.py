"""Compute a pitch-control field and its differentiable team score."""

import numpy as np

from playdiff.objectives import PitchControlConfig, pcv_score, pitch_control_field

rng = np.random.default_rng(0)
att = np.stack([rng.uniform(40, 100, 11), rng.uniform(5, 63, 11)], -1)
deff = np.stack([rng.uniform(5, 70, 11), rng.uniform(5, 63, 11)], -1)

field = pitch_control_field(att, deff)
print("grid:", field.shape, "attacking control in [%.3f, %.3f]" % (field.min(), field.max()))
print("attacking + defending control sums to 1:", np.allclose(field + pitch_control_field(deff, att), 1.0))

path_att, path_def = att[None].repeat(4, 0), deff[None].repeat(4, 0)
print("attacking PCV over 4 frames:", pcv_score(path_att, path_def))
print("defending PCV:", pcv_score(path_att, path_def, side="defending"))
