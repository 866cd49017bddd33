"""Command-line front end: seeded experiment execution, gradient checking,
the selection-separation demo, and budget sweeps.

Outputs are plain CSVs with '.' decimals and repr-formatted floats, so two
runs with the same config and seeds produce byte-identical files. Wall-clock
measurements are written to separate ``timing_*`` sidecar files, which are
the only outputs excluded from that guarantee.

Exit codes: 0 success, 1 usage/config error, 2 hard failure or failed check,
3 branch jump in the FD oracle, 4 separation-pattern assertion failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import games
from .config import RunConfig, format_config, parse_config_file
from .equilibrium import OracleConfig, random_feasible_init, sample_equilibrium
from .errors import BranchJump, ConfigError, StackgradError
from .fdcheck import check_follower_oracles, check_leader_oracles, max_relative_error
from .flow import theorem1_table
from .games import toys
from .kkt import assemble_kkt, finite_difference_jacobian, solve_equilibrium_jacobian
from .leader import augmented_lagrangian_solve

OUTPUT_ROOT_ENV = "STACKGRAD_OUTPUT_ROOT"
GRADCHECK_TOL = 1e-4

TRAJECTORY_COLUMNS = "iteration,objective,violation,lagrangian,ni_residual,regularized"
TIMING_COLUMNS = "iteration,forward_ms,backward_ms,wall_ms"


def _resolve_output_dir(path):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        path = os.path.join(root, path)
    os.makedirs(path, exist_ok=True)
    return path


def _write_atomic(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(rows, header):
    lines = [header]
    for row in rows:
        lines.append(",".join(
            repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _run_seed(cfg: RunConfig, seed: int, out_dir: str, budget=None,
              write_files=True):
    """One seeded experiment: generate instance, optimize, write artifacts.

    Returns (seed, final_objective, final_violation, total_seconds).
    """
    t0 = time.perf_counter()
    inst = games.generate_instance(cfg.domain, seed, **cfg.instance)
    game = games.build_game(inst, budget=budget if budget is not None else cfg.budget)
    pi0 = np.zeros(game.leader.param_dim)
    opt = replace(cfg.optimizer, seed=seed)
    pi, traj = augmented_lagrangian_solve(game, pi0, opt, cfg.oracle)
    total_seconds = time.perf_counter() - t0

    final = traj.records[-1]
    if write_files:
        rows = [(r.iteration, r.objective, r.violation, r.lagrangian,
                 r.ni_residual, int(r.regularized)) for r in traj.records]
        _write_atomic(os.path.join(out_dir, f"trajectory_{seed}.csv"),
                      _csv(rows, TRAJECTORY_COLUMNS))
        trows = [(r.iteration, r.forward_ms, r.backward_ms, r.wall_ms)
                 for r in traj.records]
        _write_atomic(os.path.join(out_dir, f"timing_{seed}.csv"),
                      _csv(trows, TIMING_COLUMNS))
        _write_atomic(os.path.join(out_dir, f"instance_{seed}.txt"),
                      games.serialize_instance(inst))
    return seed, final.objective, final.violation, total_seconds


def _dispatch_seeds(cfg, jobs, runner):
    """Run (label, kwargs) jobs over a worker pool; returns results and the
    list of failures as (label, message)."""
    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    workers = min(workers, len(jobs)) or 1
    results, failures = {}, []
    if workers == 1:
        for label, kwargs in jobs:
            try:
                results[label] = runner(**kwargs)
            except Exception as err:  # per-seed isolation
                failures.append((label, f"{type(err).__name__}: {err}"))
        return results, failures
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {label: pool.submit(runner, **kwargs) for label, kwargs in jobs}
        for label, fut in futures.items():
            try:
                results[label] = fut.result()
            except Exception as err:
                failures.append((label, f"{type(err).__name__}: {err}"))
    return results, failures


def cmd_solve(args) -> int:
    try:
        cfg = parse_config_file(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 1
    out_dir = _resolve_output_dir(cfg.output_dir)
    _write_atomic(os.path.join(out_dir, "config.cfg"), format_config(cfg))

    jobs = [(seed, dict(cfg=cfg, seed=seed, out_dir=out_dir))
            for seed in cfg.seeds]
    results, failures = _dispatch_seeds(cfg, jobs, _run_seed)

    summary, timing = [], []
    for seed in sorted(results):
        s, obj, viol, secs = results[seed]
        summary.append((s, obj, viol))
        timing.append((s, secs))
    _write_atomic(os.path.join(out_dir, "summary.csv"),
                  _csv(summary, "seed,final_objective,final_violation"))
    _write_atomic(os.path.join(out_dir, "timing_summary.csv"),
                  _csv(timing, "seed,total_seconds"))
    for label, msg in failures:
        print(f"seed {label} failed: {msg}", file=sys.stderr)
    print(f"solve: {len(results)}/{len(jobs)} seeds completed -> {out_dir}")
    return 2 if failures else 0


def cmd_sweep(args) -> int:
    try:
        cfg = parse_config_file(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 1
    if cfg.budgets is None or len(cfg.budgets) < 2:
        print("sweep requires a 'budgets' list with at least two values",
              file=sys.stderr)
        return 1
    out_dir = _resolve_output_dir(cfg.output_dir)
    _write_atomic(os.path.join(out_dir, "config.cfg"), format_config(cfg))

    jobs = [((b, seed), dict(cfg=cfg, seed=seed, out_dir=out_dir,
                             budget=b, write_files=False))
            for b in cfg.budgets for seed in cfg.seeds]
    results, failures = _dispatch_seeds(cfg, jobs, _run_seed)

    rows = []
    for b in cfg.budgets:
        objs = []
        for seed in cfg.seeds:
            if (b, seed) in results:
                _, obj, viol, _ = results[(b, seed)]
                rows.append((repr(float(b)), seed, obj, viol))
                objs.append((obj, viol))
        if objs:
            rows.append((repr(float(b)), "mean",
                         float(np.mean([o for o, _ in objs])),
                         float(np.mean([v for _, v in objs]))))
    _write_atomic(os.path.join(out_dir, "sweep.csv"),
                  _csv(rows, "budget,seed,final_objective,final_violation"))
    for label, msg in failures:
        print(f"run {label} failed: {msg}", file=sys.stderr)
    print(f"sweep: {len(results)}/{len(jobs)} runs completed -> {out_dir}")
    return 2 if failures else 0


def _gradcheck_game(domain, seed, scale):
    if domain == "quadratic":
        return toys.two_quadratic_game(), np.array([1.0])
    sizes = games.PAPER_SIZES[domain] if scale == "paper" else games.DESK_SIZES[domain]
    inst = games.generate_instance(domain, seed, **sizes)
    game = games.build_game(inst)
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.0, 0.5, size=game.leader.param_dim)
    return game, pi


def _interior_point(game, rng):
    """Random feasible point pulled toward the sampling-box center, so
    log-barrier-style terms stay differentiable under the FD probes."""
    from .model import JointStrategy, project_to_space

    drawn = random_feasible_init(game, rng)
    blocks = []
    for xi, spec in zip(drawn.blocks, game.followers):
        sp = spec.space
        center = project_to_space(0.5 * (sp.sample_lower + sp.sample_upper), sp)
        blocks.append(0.75 * xi + 0.25 * center)
    return JointStrategy(blocks=tuple(blocks))


def cmd_gradcheck(args) -> int:
    try:
        game, pi = _gradcheck_game(args.domain, args.seed, args.scale)
    except StackgradError as err:
        print(f"gradcheck setup failed: {err}", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed + 10_000)
    point = _interior_point(game, rng)
    report = check_follower_oracles(game, list(point.blocks), pi)
    report.update(check_leader_oracles(game, list(point.blocks), pi))

    cfg = OracleConfig(step_tol=1e-12, br_tol=1e-13)
    try:
        eq = sample_equilibrium(game, pi, args.seed, cfg)
        J = solve_equilibrium_jacobian(assemble_kkt(game, eq, pi))
        fd = finite_difference_jacobian(game, pi, args.seed, cfg=cfg, base=eq)
        report["kkt_vs_fd"] = max_relative_error(J.dx_dpi, fd)
    except BranchJump as err:
        print(f"BranchJump: {err}", file=sys.stderr)
        print("the FD oracle is invalid at this point; "
              "KKT agreement not assessed")
        return 3

    worst = max(report.values())
    for name in sorted(report):
        status = "ok" if report[name] <= GRADCHECK_TOL else "FAIL"
        print(f"{name:28s} {report[name]:.3e}  {status}")
    print(f"max relative error: {worst:.3e} (tolerance {GRADCHECK_TOL:.0e})")
    if worst <= GRADCHECK_TOL:
        print("PASS")
        return 0
    print("FAIL")
    return 2


def cmd_thm1(args) -> int:
    if args.C <= 3 * args.eps:
        print("requires C > 3*eps for the separation to be meaningful",
              file=sys.stderr)
        return 1
    try:
        table = theorem1_table(args.C, args.eps)
    except ValueError as err:
        print(f"assertion failure: {err}", file=sys.stderr)
        return 4
    print(table.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stackgrad",
        description="Gradient-based solver for one-leader multi-follower "
                    "Stackelberg games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run seeded experiments from a config")
    p_solve.add_argument("--config", required=True, help="path to a run config file")
    p_solve.set_defaults(func=cmd_solve)

    p_grad = sub.add_parser("gradcheck",
                            help="validate analytic derivatives and the KKT "
                                 "Jacobian against finite differences")
    p_grad.add_argument("--domain", required=True,
                        choices=["nfg", "ssg", "cyber", "quadratic"])
    p_grad.add_argument("--seed", type=int, default=1)
    p_grad.add_argument("--scale", choices=["desk", "paper"], default="desk",
                        help="instance sizes: CI-friendly (desk) or full (paper)")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_thm1 = sub.add_parser("thm1",
                            help="print the optimistic/pessimistic/uniform "
                                 "payoff separation table")
    p_thm1.add_argument("--C", type=float, default=9.0)
    p_thm1.add_argument("--eps", type=float, default=0.1)
    p_thm1.set_defaults(func=cmd_thm1)

    p_sweep = sub.add_parser("sweep", help="budget sweep, aggregated CSV output")
    p_sweep.add_argument("--config", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
