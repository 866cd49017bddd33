"""Example game domains and seeded instance generation."""

from __future__ import annotations

import dataclasses

from ..errors import UnknownKind
from . import cyber, nfg, ssg, toys
from .cyber import CyberInstance
from .nfg import NfgInstance
from .serialize import deserialize_instance, serialize_instance
from .ssg import SsgInstance

DESK_SIZES = {
    # CI-friendly shrink; the paper-scale defaults live in each generator
    "nfg": dict(n=3, m=3),
    "ssg": dict(n=2, num_targets=10, m=5),
    "cyber": dict(n=3),
}

PAPER_SIZES = {
    "nfg": dict(n=3, m=3),
    "ssg": dict(n=5, num_targets=100, m=50),
    "cyber": dict(n=10),
}


def generate_instance(kind: str, seed: int, **overrides):
    """Deterministic instance of the requested domain from its documented
    sampling distributions. Raises UnknownKind for anything else."""
    if kind == "nfg":
        return nfg.generate(seed, **overrides)
    if kind == "ssg":
        return ssg.generate(seed, **overrides)
    if kind == "cyber":
        return cyber.generate(seed, **overrides)
    raise UnknownKind(f"unknown game kind {kind!r}")


def build_game(inst, budget: float | None = None):
    """GameInstance for a generated instance; ``budget`` overrides the
    leader's budget where the domain has one."""
    if budget is not None and hasattr(inst, "budget"):
        inst = dataclasses.replace(inst, budget=float(budget))
    if inst.kind == "nfg":
        return nfg.build_game(inst)
    if inst.kind == "ssg":
        return ssg.build_game(inst)
    if inst.kind == "cyber":
        return cyber.build_game(inst)
    raise UnknownKind(f"unknown game kind {inst.kind!r}")


__all__ = [
    "CyberInstance", "NfgInstance", "SsgInstance", "DESK_SIZES", "PAPER_SIZES",
    "generate_instance", "build_game", "serialize_instance",
    "deserialize_instance", "toys", "nfg", "ssg", "cyber",
]
