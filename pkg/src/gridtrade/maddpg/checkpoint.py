"""JSON checkpoints: layer sizes plus row-major parameter arrays."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .agent import AgentBundle
from .mlp import Mlp

FORMAT = "gridtrade-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "sizes": list(mlp.sizes),
        "out_activation": mlp.out_activation,
        "params": [p.ravel().tolist() for p in mlp.parameters()],
    }


def mlp_from_dict(doc: dict) -> Mlp:
    mlp = Mlp(doc["sizes"], doc["out_activation"])
    shapes = [p.shape for p in mlp.parameters()]
    flat = doc["params"]
    if len(flat) != len(shapes):
        raise CheckpointError("parameter list does not match layer sizes")
    params = []
    for arr, shape in zip(flat, shapes):
        arr = np.asarray(arr, dtype=float)
        if arr.size != int(np.prod(shape)):
            raise CheckpointError(f"parameter of size {arr.size} cannot fill {shape}")
        params.append(arr.reshape(shape))
    mlp.set_parameters(params)
    return mlp


def save_checkpoint(path, agents: Sequence[AgentBundle], agent_ids: Sequence[str],
                    meta: dict | None = None) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "agents": [
            {"id": aid, "actor": mlp_to_dict(a.actor), "critic": mlp_to_dict(a.critic)}
            for aid, a in zip(agent_ids, agents)
        ],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_actors(path) -> dict[str, Mlp]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise CheckpointError(f"{path}: not a version-{VERSION} checkpoint")
    return {entry["id"]: mlp_from_dict(entry["actor"]) for entry in doc["agents"]}
