"""Batch front-end: configure a problem, run solves and experiments, persist results.

Every command reads one config file, writes into one output directory
(including a copy of the config, so re-running the copy reproduces the
run), and exits 0 on success, 2 on validation failure, 3 on numeric
failure.
"""

from __future__ import annotations

import functools
import json
import os
import statistics
import sys
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, ProblemConfig, build_problem
from .convergence_lab import (davie_defect, dyadic_sup_rate, fit_rate,
                              holder_rate, rational_rate)
from .errors import NumericFailure
from .model import check_z_bound, check_z_cocycle, check_z_lipschitz
from .rough_path import Grid
from .splitting_solver import (solve_milstein, solve_ode_reference,
                               solve_split, write_trajectory_csv)

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _max_threads() -> int:
    raw = os.environ.get("RDE_SPLIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"RDE_SPLIT_THREADS must be an integer, got {raw!r}")


def _write_json(directory: Path, name: str, payload: dict) -> None:
    with open(directory / name, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(config_path: str, out: str, seed):
    cfg = ProblemConfig.from_file(config_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.ini", "w", encoding="utf-8") as fh:
        fh.write(cfg.emit())
    return cfg, out_dir, seed


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except NumericFailure as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        except (ConfigError, ValueError, OSError) as exc:
            click.echo(f"invalid run: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


config_option = click.option("--config", "config_path", required=True,
                             type=click.Path(exists=False), help="Config file (INI).")
out_option = click.option("--out", required=True, type=click.Path(),
                          help="Output directory for this run.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Override the driver seed.")


@click.group()
def main():
    """Splitting-scheme solver and experiment runner for rough differential equations."""


@main.command()
@config_option
@out_option
@seed_option
@click.option("--oracle", is_flag=True,
              help="Also integrate the interpolant ODE (RK4, 64 substeps per step).")
@_exit_codes
def solve(config_path, out, seed, oracle):
    """Run the split scheme once and write the trajectory."""
    cfg, out_dir, seed = _prepare(config_path, out, seed)
    problem, grid = build_problem(cfg, seed)
    traj = solve_split(problem.driver, problem.field, problem.z, problem.y0, grid)
    with open(out_dir / "trajectory.csv", "w", encoding="utf-8") as fh:
        write_trajectory_csv(traj, fh)
    summary = {
        "n_steps": grid.N,
        "t_final": grid.T,
        "y_final": [float(v) for v in traj.u[-1]],
    }
    if oracle:
        reference = solve_ode_reference(problem.path, problem.field,
                                        problem.y0, grid, substeps=64)
        summary["max_oracle_deviation"] = float(
            np.max(np.linalg.norm(traj.u - reference, axis=1)))
    _write_json(out_dir, "summary.json", summary)


@main.command()
@config_option
@out_option
@seed_option
@click.option("--kind", type=click.Choice(["sup", "holder", "rational"]),
              required=True, help="Which rate experiment to run.")
@_exit_codes
def rates(config_path, out, seed, kind):
    """Measure a convergence rate across refining grids."""
    cfg, out_dir, seed = _prepare(config_path, out, seed)
    exp = cfg.experiment
    base_seed = cfg.driver.seed if seed is None else seed
    # a single rough sample path gives a noisy slope; deterministic drivers
    # need only one run
    if cfg.driver.kind == "synthetic":
        seeds = [base_seed + i for i in range(exp.seeds)]
    else:
        seeds = [base_seed]
    workers = _max_threads()
    slopes = []
    report = None
    for i, run_seed in enumerate(seeds):
        problem, _ = build_problem(cfg, run_seed)
        if kind == "sup":
            report = dyadic_sup_rate(problem, exp.base_n, exp.levels,
                                     max_workers=workers)
        elif kind == "holder":
            report = holder_rate(problem, exp.beta, exp.base_n, exp.levels,
                                 max_workers=workers)
        else:
            report = rational_rate(problem, exp.q_num, exp.q_den, exp.base_n,
                                   exp.levels, max_workers=workers)
        slopes.append(report.slope)
        with open(out_dir / f"rates_seed{run_seed}.csv", "w", encoding="utf-8") as fh:
            report.write_csv(fh)
    summary = report.summary(seeds)
    summary["slope"] = float(statistics.median(slopes))
    _write_json(out_dir, "rates_summary.json", summary)


@main.command("check-z")
@config_option
@out_option
@seed_option
@_exit_codes
def check_z(config_path, out, seed):
    """Estimate the three condition constants of the configured Z map."""
    cfg, out_dir, seed = _prepare(config_path, out, seed)
    problem, grid = build_problem(cfg, seed)
    exp = cfg.experiment
    rng = np.random.default_rng(cfg.field.seed + 1)
    n = problem.field.n
    box = exp.box
    xs = problem.y0 + rng.uniform(-box, box, (exp.samples, n))
    pairs = list(zip(xs, problem.y0 + rng.uniform(-box, box, (exp.samples, n))))
    pts = grid.points
    n_triples = min(500, 10 * exp.samples)
    triples = np.sort(
        pts[rng.integers(0, len(pts), (n_triples, 3))], axis=1)
    alpha = problem.alpha
    box_spec = [float(v) for v in problem.y0 - box] + [float(v) for v in problem.y0 + box]

    bound = check_z_bound(problem.z, xs, grid, alpha)
    lipschitz = check_z_lipschitz(problem.z, pairs, grid, alpha,
                                  problem.field.gamma)
    cocycle = check_z_cocycle(problem.z, problem.field, problem.driver, xs,
                              triples, alpha)
    for report, name in ((bound, "z_bound.json"),
                         (lipschitz, "z_lipschitz.json"),
                         (cocycle, "z_cocycle.json")):
        report.box = tuple(box_spec)
        _write_json(out_dir, name, report.to_json_dict())


@main.command()
@config_option
@out_option
@seed_option
@_exit_codes
def davie(config_path, out, seed):
    """Measure the Davie-solution defect of the split trajectory."""
    cfg, out_dir, seed = _prepare(config_path, out, seed)
    problem, grid = build_problem(cfg, seed)
    traj = solve_split(problem.driver, problem.field, problem.z, problem.y0, grid)
    report = davie_defect(traj, problem.field, problem.z, problem.driver,
                          problem.field.gamma, problem.alpha)
    _write_json(out_dir, "davie.json", report.to_json_dict())


@main.command("compare-schemes")
@config_option
@out_option
@seed_option
@_exit_codes
def compare_schemes(config_path, out, seed):
    """Compare split and one-step (Milstein) trajectories over three doublings."""
    cfg, out_dir, seed = _prepare(config_path, out, seed)
    problem, grid = build_problem(cfg, seed)
    levels = [grid.N, 2 * grid.N, 4 * grid.N]
    diffs = []
    for N in levels:
        level_grid = Grid(grid.T, N)
        split_traj = solve_split(problem.driver, problem.field, problem.z,
                                 problem.y0, level_grid)
        milstein_traj = solve_milstein(problem.driver, problem.field,
                                       problem.z, problem.y0, level_grid)
        diffs.append(float(np.max(np.linalg.norm(
            split_traj.u - milstein_traj.values, axis=1))))
        if N == grid.N:
            with open(out_dir / "split.csv", "w", encoding="utf-8") as fh:
                write_trajectory_csv(split_traj, fh)
            with open(out_dir / "milstein.csv", "w", encoding="utf-8") as fh:
                write_trajectory_csv(milstein_traj, fh)
    order = fit_rate(levels, diffs)
    _write_json(out_dir, "compare.json", {
        "levels": levels,
        "max_diffs": diffs,
        "order": None if order == float("inf") else order,
        "exact_agreement": order == float("inf"),
    })


if __name__ == "__main__":
    main()
