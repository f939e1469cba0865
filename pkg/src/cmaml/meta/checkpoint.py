"""Versioned, byte-stable checkpoint container.

Layout: the magic line ``CMAML-CKPT <version>``, one line of JSON (sorted
keys) describing scalars, the config echo and every array's dtype, shape and
byte offset, then the arrays' raw little-endian float64 bytes back to back.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAGIC = "CMAML-CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class MetaCheckpoint:
    mode: str
    seed: int
    iteration: int
    lam: float
    eta: float
    policy_layers: tuple
    policy_head: str
    critic_layers: tuple
    arrays: dict = field(default_factory=dict)  # name -> 1-D float array
    config: dict = field(default_factory=dict)  # flat key -> string echo

    @property
    def policy_params(self):
        return self.arrays["policy"]

    @property
    def cost_critic(self):
        return self.arrays["cost_critic"]

    def to_bytes(self) -> bytes:
        names = sorted(self.arrays)
        entries, offset, blobs = [], 0, []
        for name in names:
            arr = np.ascontiguousarray(self.arrays[name], dtype="<f8")
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "dtype": "<f8"})
            blob = arr.tobytes()
            blobs.append(blob)
            offset += len(blob)
        header = {
            "mode": self.mode, "seed": int(self.seed), "iteration": int(self.iteration),
            "lam": repr(float(self.lam)), "eta": repr(float(self.eta)),
            "policy_layers": list(self.policy_layers), "policy_head": self.policy_head,
            "critic_layers": list(self.critic_layers),
            "arrays": entries, "config": {k: str(v) for k, v in self.config.items()},
        }
        head = f"{MAGIC} {VERSION}\n" + json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
        return head.encode("utf-8") + b"".join(blobs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MetaCheckpoint":
        try:
            first, rest = data.split(b"\n", 1)
            header_line, payload = rest.split(b"\n", 1)
        except ValueError as exc:
            raise CheckpointError("truncated checkpoint") from exc
        parts = first.decode("utf-8", "replace").split()
        if len(parts) != 2 or parts[0] != MAGIC:
            raise CheckpointError("not a checkpoint (bad magic line)")
        if int(parts[1]) != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {parts[1]}")
        h = json.loads(header_line)
        arrays = {}
        for e in h["arrays"]:
            n = int(np.prod(e["shape"])) * 8
            chunk = payload[e["offset"]:e["offset"] + n]
            if len(chunk) != n:
                raise CheckpointError(f"array {e['name']!r} is truncated")
            arrays[e["name"]] = np.frombuffer(chunk, dtype=e["dtype"]).reshape(e["shape"]).astype(float)
        return cls(h["mode"], h["seed"], h["iteration"], float(h["lam"]), float(h["eta"]),
                   tuple(h["policy_layers"]), h["policy_head"], tuple(h["critic_layers"]),
                   arrays, dict(h["config"]))

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "MetaCheckpoint":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
