"""Self-describing text serialization of generated instances.

Scalars on ``name value`` lines, arrays as a header line
``array name dim0 dim1 ...`` followed by one line of row-major values
(``repr`` floats, so a round trip is lossless). The leading line pins the
format version.
"""

from __future__ import annotations

import numpy as np

from ..errors import UnknownKind
from .cyber import CyberInstance
from .nfg import NfgInstance
from .ssg import SsgInstance

_HEADER = "stackgrad-instance 1"


def _fmt_scalar(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _emit_array(lines, name, arr):
    arr = np.asarray(arr)
    dims = " ".join(str(d) for d in arr.shape)
    lines.append(f"array {name} {dims}".rstrip())
    if np.issubdtype(arr.dtype, np.integer):
        lines.append(" ".join(str(int(v)) for v in arr.reshape(-1)))
    else:
        lines.append(" ".join(repr(float(v)) for v in arr.reshape(-1)))


def serialize_instance(inst) -> str:
    lines = [_HEADER, f"kind {inst.kind}", f"seed {inst.seed}"]
    if inst.kind == "nfg":
        lines.append(f"n {inst.n}")
        lines.append("m " + " ".join(str(v) for v in inst.m))
        lines.append(f"lambda_risk {_fmt_scalar(inst.lambda_risk)}")
        lines.append(f"budget {_fmt_scalar(inst.budget)}")
        for i, U in enumerate(inst.payoffs):
            _emit_array(lines, f"payoffs{i}", U)
    elif inst.kind == "ssg":
        for name in ("n", "num_targets", "m"):
            lines.append(f"{name} {getattr(inst, name)}")
        lines.append(f"omega {_fmt_scalar(inst.omega)}")
        lines.append(f"budget {_fmt_scalar(inst.budget)}")
        _emit_array(lines, "target_sets", inst.target_sets)
        _emit_array(lines, "defender_penalties", inst.defender_penalties)
        _emit_array(lines, "leader_penalties", inst.leader_penalties)
        _emit_array(lines, "attractiveness", inst.attractiveness)
        _emit_array(lines, "budgets", inst.budgets)
    elif inst.kind == "cyber":
        lines.append(f"n {inst.n}")
        lines.append(f"risk_aversion {_fmt_scalar(inst.risk_aversion)}")
        lines.append(f"value_preference {_fmt_scalar(inst.value_preference)}")
        _emit_array(lines, "costs", inst.costs)
        _emit_array(lines, "losses", inst.losses)
        _emit_array(lines, "weights", inst.weights)
    else:
        raise UnknownKind(f"cannot serialize kind {inst.kind!r}")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text):
        self.lines = [ln for ln in text.splitlines()]
        self.pos = 0

    def next(self):
        ln = self.lines[self.pos]
        self.pos += 1
        return ln

    def scalar(self, name, conv):
        key, val = self.next().split(maxsplit=1)
        if key != name:
            raise ValueError(f"expected field {name!r}, found {key!r}")
        return conv(val)

    def array(self, name, dtype=float):
        head = self.next().split()
        if head[0] != "array" or head[1] != name:
            raise ValueError(f"expected array {name!r}, found {head[:2]}")
        shape = tuple(int(v) for v in head[2:])
        vals = self.next().split()
        arr = np.array([dtype(v) for v in vals],
                       dtype=int if dtype is int else float)
        return arr.reshape(shape)


def deserialize_instance(text: str):
    rd = _Reader(text)
    if rd.next().strip() != _HEADER:
        raise ValueError("not a stackgrad instance file")
    kind = rd.scalar("kind", str)
    seed = rd.scalar("seed", int)
    if kind == "nfg":
        n = rd.scalar("n", int)
        m = tuple(int(v) for v in rd.scalar("m", str).split())
        lam = rd.scalar("lambda_risk", float)
        budget = rd.scalar("budget", float)
        payoffs = tuple(rd.array(f"payoffs{i}") for i in range(n))
        return NfgInstance(seed=seed, n=n, m=m, payoffs=payoffs,
                           lambda_risk=lam, budget=budget)
    if kind == "ssg":
        n = rd.scalar("n", int)
        num_targets = rd.scalar("num_targets", int)
        m = rd.scalar("m", int)
        omega = rd.scalar("omega", float)
        budget = rd.scalar("budget", float)
        return SsgInstance(seed=seed, n=n, num_targets=num_targets, m=m,
                           target_sets=rd.array("target_sets", int),
                           defender_penalties=rd.array("defender_penalties"),
                           leader_penalties=rd.array("leader_penalties"),
                           attractiveness=rd.array("attractiveness"),
                           budgets=rd.array("budgets"),
                           omega=omega, budget=budget)
    if kind == "cyber":
        n = rd.scalar("n", int)
        risk = rd.scalar("risk_aversion", float)
        vpref = rd.scalar("value_preference", float)
        return CyberInstance(seed=seed, n=n, costs=rd.array("costs"),
                             losses=rd.array("losses"),
                             weights=rd.array("weights"),
                             risk_aversion=risk, value_preference=vpref)
    raise UnknownKind(f"unknown instance kind {kind!r}")
