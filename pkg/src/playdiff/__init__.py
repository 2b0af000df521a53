"""playdiff: guided multi-agent trajectory diffusion for football tactics.

Subpackages
-----------
diffnum     differentiable array expressions (forward + reverse mode)
pitchdata   dataset schema, synthetic simulator, rewards, windowing
madit       multi-agent diffusion-transformer denoiser and value model
sampler     noise schedule, training loss, guided reverse sampling
objectives  rule/DSL/value guidance objectives and pitch control
evalkit     displacement metrics and guidance-score reports
tacticd     command-line interface and HTTP service
"""

import os as _os

# Pin BLAS to one thread before numpy loads: keeps reductions deterministic
# across machines and avoids spin-wait contention on small-core boxes.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
