"""Replayable run configuration: flat ``key = value`` text with one section
per module, strict keys, and a lossless round trip.

Unknown sections or keys are hard errors with the offending line number, so
a typo can never silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .equilibrium import OracleConfig
from .errors import ConfigError
from .leader import OptimizerConfig

DEFAULT_SEEDS = {"nfg": (1, 30), "cyber": (1, 30), "ssg": (1, 100)}

_INSTANCE_KEYS = {
    "nfg": {"n": int, "m": int, "lambda_risk": float, "allow_large": bool},
    "ssg": {"n": int, "m": int, "num_targets": int, "omega": float},
    "cyber": {"n": int, "risk_aversion": float, "value_preference": float},
}

_ORACLE_KEYS = {
    "relax_weight": float, "max_outer_iters": int, "br_tol": float,
    "br_max_iters": int, "eq_tol": float, "step_tol": float,
}

_OPTIMIZER_KEYS = {
    "step_size": float, "period": int, "penalty": float,
    "total_iters": int, "batch_size": int,
}

_RUN_KEYS = {"domain": str, "seeds": str, "budget": float, "budgets": str,
             "output_dir": str, "workers": int}


@dataclass(frozen=True)
class RunConfig:
    domain: str
    seeds: tuple[int, ...]
    budget: float | None = None
    budgets: tuple[float, ...] | None = None
    output_dir: str = "out"
    workers: int = 0  # 0 = number of cores
    instance: dict = field(default_factory=dict)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)


def _parse_bool(text, lineno):
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"line {lineno}: expected a boolean, got {text!r}")


def _parse_seeds(text, lineno):
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse seed list {text!r}") from None


def _parse_budgets(text, lineno):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse budget list {text!r}") from None


def parse_config(text: str) -> RunConfig:
    section = None
    raw: dict[str, dict[str, tuple[str, int]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in ("run", "instance", "oracle", "optimizer"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            raw.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside of any [section]")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key in raw[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        raw[section][key] = (val, lineno)

    run = raw.get("run", {})
    if "domain" not in run:
        raise ConfigError("line 1: missing required key 'domain' in [run]")
    dom_val, dom_line = run["domain"]
    domain = dom_val
    if domain not in _INSTANCE_KEYS:
        raise ConfigError(f"line {dom_line}: unknown domain {domain!r}")

    for key, (val, lineno) in run.items():
        if key not in _RUN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [run]")

    def run_get(key, conv, default=None):
        if key not in run:
            return default
        val, lineno = run[key]
        try:
            return conv(val)
        except (TypeError, ValueError):
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from None

    if "seeds" in run:
        seeds = _parse_seeds(*run["seeds"])
    else:
        lo, hi = DEFAULT_SEEDS[domain]
        seeds = tuple(range(lo, hi + 1))
    budget = run_get("budget", float)
    budgets = _parse_budgets(*run["budgets"]) if "budgets" in run else None
    output_dir = run_get("output_dir", str, "out")
    workers = run_get("workers", int, 0)

    instance = {}
    allowed = _INSTANCE_KEYS[domain]
    for key, (val, lineno) in raw.get("instance", {}).items():
        if key not in allowed:
            raise ConfigError(
                f"line {lineno}: key {key!r} not valid in [instance] for domain {domain!r}")
        conv = allowed[key]
        if conv is bool:
            instance[key] = _parse_bool(val, lineno)
        else:
            try:
                instance[key] = conv(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from None

    def section_config(name, keys, ctor):
        kwargs = {}
        for key, (val, lineno) in raw.get(name, {}).items():
            if key not in keys:
                raise ConfigError(f"line {lineno}: unknown key {key!r} in [{name}]")
            try:
                kwargs[key] = keys[key](val)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from None
        try:
            return ctor(**kwargs)
        except ValueError as err:
            raise ConfigError(f"invalid [{name}] settings: {err}") from None

    oracle = section_config("oracle", _ORACLE_KEYS, OracleConfig)
    optimizer = section_config("optimizer", _OPTIMIZER_KEYS, OptimizerConfig)

    return RunConfig(domain=domain, seeds=seeds, budget=budget, budgets=budgets,
                     output_dir=output_dir, workers=workers, instance=instance,
                     oracle=oracle, optimizer=optimizer)


def parse_config_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fmt_seeds(seeds) -> str:
    if len(seeds) > 1 and seeds == tuple(range(seeds[0], seeds[-1] + 1)):
        return f"{seeds[0]}..{seeds[-1]}"
    return ",".join(str(s) for s in seeds)


def format_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(format_config(cfg)) == cfg``."""
    lines = ["[run]", f"domain = {cfg.domain}", f"seeds = {_fmt_seeds(cfg.seeds)}"]
    if cfg.budget is not None:
        lines.append(f"budget = {_fmt(cfg.budget)}")
    if cfg.budgets is not None:
        lines.append("budgets = " + ",".join(repr(float(b)) for b in cfg.budgets))
    lines.append(f"output_dir = {cfg.output_dir}")
    lines.append(f"workers = {cfg.workers}")
    if cfg.instance:
        lines.append("[instance]")
        for key in sorted(cfg.instance):
            lines.append(f"{key} = {_fmt(cfg.instance[key])}")
    lines.append("[oracle]")
    for f in ("relax_weight", "max_outer_iters", "br_tol", "br_max_iters",
              "eq_tol", "step_tol"):
        lines.append(f"{f} = {_fmt(getattr(cfg.oracle, f))}")
    lines.append("[optimizer]")
    for f in ("step_size", "period", "penalty", "total_iters", "batch_size"):
        lines.append(f"{f} = {_fmt(getattr(cfg.optimizer, f))}")
    return "\n".join(lines) + "\n"
