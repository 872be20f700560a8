"""Checkpoint container.

A checkpoint is a numpy ``.npz`` archive (uncompressed) with these members:

``meta``              0-d unicode array holding a JSON document:
                      ``{"format": "rawpipe-checkpoint", "version": 1,
                      "network": <NetworkSpec dict>, "dtype": "float64",
                      "adam": {"step", "beta1", "beta2", "eps", "lr0", ...}
                      or null, "rng": <numpy bit-generator state> or null,
                      "extra": {...}}``
``param/<name>``      every learnable array, keyed by hierarchical module name
``buffer/<name>``     BatchNorm running statistics
``adam_m/<i>``,       ADAM moments in parameter order
``adam_v/<i>``

Arrays are stored in their native dtype, so a float64 round trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .layers import Network
from .optim import Adam, AdamState
from .specs import NetworkSpec

FORMAT = "rawpipe-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    net: Network
    adam: Adam | None = None
    rng_state: dict | None = None
    extra: dict = field(default_factory=dict)


def save_checkpoint(path, net: Network, adam: Adam | None = None,
                    rng: np.random.Generator | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    arrays = {}
    for name, p in net.named_parameters():
        arrays[f"param/{name}"] = p.value
    for name, b in net.named_buffers():
        arrays[f"buffer/{name}"] = b
    adam_meta = None
    if adam is not None:
        st = adam.state
        adam_meta = {
            "step": st.step, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
            "lr0": adam.lr0, "decay_rate": adam.decay_rate, "decay_every": adam.decay_every,
        }
        for i, (m, v) in enumerate(zip(st.m, st.v)):
            arrays[f"adam_m/{i}"] = m
            arrays[f"adam_v/{i}"] = v
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "network": net.spec.to_dict(),
        "dtype": net.dtype.name,
        "adam": adam_meta,
        "rng": rng.bit_generator.state if rng is not None else None,
        "extra": extra or {},
    }
    arrays["meta"] = np.array(json.dumps(meta))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as z:
        if "meta" not in z:
            raise CheckpointError(f"{path}: not a rawpipe checkpoint")
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != FORMAT:
            raise CheckpointError(f"{path}: unexpected format {meta.get('format')!r}")
        if meta.get("version") != VERSION:
            raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
        net = Network(NetworkSpec.from_dict(meta["network"]), dtype=meta["dtype"])
        for name, p in net.named_parameters():
            p.value[...] = z[f"param/{name}"]
        for name, b in net.named_buffers():
            b[...] = z[f"buffer/{name}"]
        adam = None
        if meta["adam"] is not None:
            a = meta["adam"]
            n = len(net.parameters())
            has_moments = "adam_m/0" in z
            state = AdamState(
                beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], step=a["step"],
                m=[z[f"adam_m/{i}"].copy() for i in range(n)] if has_moments else [],
                v=[z[f"adam_v/{i}"].copy() for i in range(n)] if has_moments else [],
            )
            adam = Adam(net.parameters(), a["lr0"], a["decay_rate"], a["decay_every"], state)
    return Checkpoint(net=net, adam=adam, rng_state=meta["rng"], extra=meta["extra"])
