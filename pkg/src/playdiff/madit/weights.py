"""Weight initialization and the binary checkpoint container.

Checkpoint layout (little-endian):
  bytes 0-7    magic ``PDCKPT01``
  bytes 8-11   uint32 header length N
  bytes 12..   UTF-8 JSON header: {"version", "config", "extra", "arrays":
               [{"name", "shape", "dtype", "offset", "nbytes"}, ...]}
  then the raw array buffers at their stated offsets (relative to the end
  of the header), C-contiguous little-endian.

Reload is bit-exact; see docs/checkpoint-format.md.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from typing import Dict, Optional, Tuple

import numpy as np

from .config import ModelConfig, weight_spec

MAGIC = b"PDCKPT01"

_ZERO_INIT_SUFFIXES = (".ada.w", ".ada.b", "head.w", "head.b", "vhead.w2", "vhead.b2", "out_skip.w", "out_skip.b")


def _is_zero_init(name: str) -> bool:
    return name.endswith(_ZERO_INIT_SUFFIXES) or name.startswith(("final.ada",))


def init_weights(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> Dict[str, np.ndarray]:
    """Truncated-normal (std 0.02, clipped at 2 sigma) matrices, zero biases.

    Adaptive-norm modulation heads and the output head start at zero so
    every block begins as the identity and the denoiser outputs zero noise.
    """
    rng = np.random.default_rng(seed)
    out: Dict[str, np.ndarray] = {}
    for name, shape in weight_spec(cfg).items():
        if _is_zero_init(name) or (len(shape) == 1 and not name.endswith("table")):
            arr = np.zeros(shape, dtype=dtype)
        else:
            arr = np.clip(rng.normal(0.0, 0.02, size=shape), -0.04, 0.04).astype(dtype)
        out[name] = arr
    if "out_skip.b" in out:
        # start the clean-window head at the identity (x0_net ~ tau), which
        # keeps the assembled noise estimate well-scaled at every step
        out["out_skip.b"] = np.ones((1,), dtype=dtype)
    return out


def config_to_dict(cfg: ModelConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> ModelConfig:
    return ModelConfig(**d)


def save_checkpoint(path, weights: Dict[str, np.ndarray], cfg: ModelConfig, extra: Optional[dict] = None) -> None:
    arrays = []
    offset = 0
    buffers = []
    for name in sorted(weights):
        arr = np.ascontiguousarray(weights[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        buf = arr.tobytes()
        arrays.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": arr.dtype.str.replace(">", "<"),
                "offset": offset,
                "nbytes": len(buf),
            }
        )
        buffers.append(buf)
        offset += len(buf)
    header = json.dumps(
        {"version": 1, "config": config_to_dict(cfg), "extra": extra or {}, "arrays": arrays}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], ModelConfig, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file (magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        blob = fh.read()
    weights = {}
    for meta in header["arrays"]:
        start, n = meta["offset"], meta["nbytes"]
        arr = np.frombuffer(blob[start : start + n], dtype=np.dtype(meta["dtype"]))
        weights[meta["name"]] = arr.reshape(meta["shape"]).copy()
    return weights, config_from_dict(header["config"]), header.get("extra", {})
