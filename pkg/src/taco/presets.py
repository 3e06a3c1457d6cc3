"""Reproduction presets: the trained variants the evaluation studies compare.

Variant names follow the attitude-representation / constraint labels used in
the sweep study: observation mode ("mat" rotation matrix, "quat" quaternion)
crossed with the Lipschitz budget ("none", "1", "1.5").
"""

from __future__ import annotations

import os
from dataclasses import replace

from .trainer import TrainConfig, Trainer


def _cfg(**kw) -> TrainConfig:
    base = dict(envs=256, seed=0, checkpoint_every=0)
    base.update(kw)
    return TrainConfig(**base)


VARIANTS: dict[str, TrainConfig] = {
    "pos-mat-1.5": _cfg(task="pos", obs_mode="mat", k_lip=1.5, updates=1000),
    "pos-mat-1": _cfg(task="pos", obs_mode="mat", k_lip=1.0, updates=1000),
    "pos-mat-none": _cfg(task="pos", obs_mode="mat", k_lip=None, updates=450),
    "pos-quat-1.5": _cfg(task="pos", obs_mode="quat", k_lip=1.5, updates=1000),
    "pos-quat-1": _cfg(task="pos", obs_mode="quat", k_lip=1.0, updates=1000),
    "pos-quat-none": _cfg(task="pos", obs_mode="quat", k_lip=None, updates=450),
    "circle-mat-1.5": _cfg(task="circle", obs_mode="mat", k_lip=1.5, updates=800),
    "flip-mat-1.5": _cfg(task="flip", obs_mode="mat", k_lip=1.5, updates=900),
}


def variant_config(name: str) -> TrainConfig:
    if name not in VARIANTS:
        raise KeyError(f"unknown variant {name!r}; known: {sorted(VARIANTS)}")
    return replace(VARIANTS[name])


def variant_policy_path(name: str, root: str) -> str:
    return os.path.join(root, name, "policy_final.json")


def ensure_variant(name: str, root: str, log_every: int = 50) -> str:
    """Train the named variant into <root>/<name>/ unless its final
    checkpoint already exists; returns the checkpoint path."""
    path = variant_policy_path(name, root)
    if os.path.exists(path):
        return path
    cfg = variant_config(name)
    trainer = Trainer(cfg, os.path.join(root, name))
    trainer.train(log_every=log_every)
    return path
