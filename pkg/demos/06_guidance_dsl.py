"""Write tactical objectives as guidance-DSL programs."""

import numpy as np

from playdiff.objectives import dsl_eval, dsl_parse, pretty_print, render_prompt

program = dsl_parse("""
let d = dist(team_pos, ball_pos) in
let m = topk_mask(d, 3) in
- sum(relu(d - 8.0) * m, all) / (sum(m, all) + 0.000001)
""")
print("normalized:", pretty_print(program))

rng = np.random.default_rng(0)
ball = rng.uniform(30, 70, (6, 1, 2))
team = rng.uniform(20, 80, (6, 11, 2))
score, grad = dsl_eval(program, ball, team)
print(f"score {score:.3f}; gradient pulls stragglers toward the ball "
      f"(norm {np.linalg.norm(grad):.4f})")

# the prompt used when an external text-to-program generator is configured
print("\n--- prompt preview (first lines) ---")
print("\n".join(render_prompt("attacking", "push the wingers high and wide").splitlines()[:6]))
