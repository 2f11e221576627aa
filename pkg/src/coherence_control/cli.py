"""Command-line runs of the three qutrit experiments.

    coherence-control simulate-free  [--config FILE] [--out DIR] [--steps N]
    coherence-control simulate-const [--config FILE] [--out DIR] [--steps N]
    coherence-control optimize       [--config FILE] [--out DIR] [--steps N] [--max-iters N]

Each run writes ``trajectory.csv`` and ``summary.txt`` into the output
directory; ``optimize`` adds ``adjoint.csv`` and ``convergence.csv``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .dynamics import (
    AdjointTrajectory,
    ControlGrid,
    NonFiniteIterate,
    StateTrajectory,
    integrate_forward,
)
from .models import ConfigError, ExperimentConfig, load_config, paper_defaults
from .pmp import InfeasibleStart, MultiplierPath, coherence_squared_path, cost, sweep

log = logging.getLogger("coherence_control")

SUBCOMMANDS = {
    "simulate-free": "free",
    "simulate-const": "constant_control",
    "optimize": "optimize",
}

# density-matrix entries written to trajectory.csv, and costate entries to adjoint.csv
RHO_ENTRIES = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
PI_ENTRIES = ((0, 0), (0, 1), (1, 2), (1, 0))

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4
EXIT_IO = 5


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _complex_columns(prefix: str, entries) -> list[str]:
    cols = []
    for j, k in entries:
        cols += [f"re_{prefix}{j}{k}", f"im_{prefix}{j}{k}"]
    return cols


def _node_values(per_interval: np.ndarray) -> np.ndarray:
    """Extend one-per-interval samples to the nodes; the last node repeats the final hold."""
    per_interval = np.asarray(per_interval, dtype=float)
    return np.append(per_interval, per_interval[-1])


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_timeseries(
    traj: StateTrajectory,
    adjoint: AdjointTrajectory | None,
    controls: ControlGrid,
    multipliers: MultiplierPath | None,
    path,
    pairs=((0, 1),),
) -> list[Path]:
    """Write ``trajectory.csv`` (and ``adjoint.csv`` if given a costate) into ``path``.

    Controls and multipliers are held per interval; the node at ``tf`` repeats
    the final interval's value, so ``J`` is recomputed from all rows but the last.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    n_nodes = len(traj)
    if controls.steps + 1 != n_nodes:
        raise ValueError(f"{controls.steps} control intervals do not match {n_nodes} trajectory samples")
    c = np.sqrt(coherence_squared_path(traj, pairs))
    u = _node_values(controls.u)
    header = ["t"] + _complex_columns("rho", RHO_ENTRIES) + ["C", "u"]
    extra = []
    if multipliers is not None:
        if multipliers.mu.size != controls.steps:
            raise ValueError("multiplier path does not match the control grid")
        header.append("mu")
        extra.append(_node_values(multipliers.mu))
    rows = []
    for m in range(n_nodes):
        rho = traj.states[m]
        row = [_fmt(traj.times[m])]
        for j, k in RHO_ENTRIES:
            row += [_fmt(rho[j, k].real), _fmt(rho[j, k].imag)]
        row += [_fmt(c[m]), _fmt(u[m])] + [_fmt(col[m]) for col in extra]
        rows.append(row)
    written = [_write_csv(out / "trajectory.csv", header, rows)]

    if adjoint is not None:
        if len(adjoint) != n_nodes:
            raise ValueError("adjoint and state trajectories have different lengths")
        header = ["t"] + _complex_columns("pi", PI_ENTRIES)
        rows = []
        for m in range(n_nodes):
            p = adjoint.costates[m]
            row = [_fmt(adjoint.times[m])]
            for j, k in PI_ENTRIES:
                row += [_fmt(p[j, k].real), _fmt(p[j, k].imag)]
            rows.append(row)
        written.append(_write_csv(out / "adjoint.csv", header, rows))
    return written


def write_convergence(history, path) -> Path:
    rows = [[str(i), _fmt(v)] for i, v in enumerate(history, start=1)]
    return _write_csv(Path(path), ["iteration", "metric"], rows)


@dataclass(frozen=True)
class RunSummary:
    mode: str
    parameters: dict
    cost: float
    c_initial: float
    c_final: float
    c_min: float
    c_max: float
    iterations: int
    converged: bool
    wall_seconds: float

    def __post_init__(self):
        for name in ("cost", "c_initial", "c_final", "c_min", "c_max", "wall_seconds"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"summary field {name} is not finite")
        if self.c_min > self.c_max:
            raise ValueError("c_min exceeds c_max")

    def lines(self) -> list[str]:
        out = [f"mode = {self.mode}"]
        for k in ("cost", "c_initial", "c_final", "c_min", "c_max"):
            out.append(f"{k} = {_fmt(getattr(self, k))}")
        out += [
            f"iterations = {self.iterations}",
            f"converged = {str(self.converged).lower()}",
            f"wall_seconds = {self.wall_seconds:.3f}",
        ]
        out += [f"param.{k} = {v}" for k, v in self.parameters.items()]
        return out

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text("\n".join(self.lines()) + "\n")
        return path


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = value
    return out


def parameter_echo(cfg: ExperimentConfig) -> dict:
    echo = {f"qutrit.{k}": _fmt(v) for k, v in asdict(cfg.qutrit).items()}
    echo |= {f"grid.{k}": str(v) for k, v in asdict(cfg.grid).items()}
    c = cfg.solver.constraint
    echo |= {
        "constraint.alpha": _fmt(c.alpha),
        "constraint.beta": _fmt(c.beta),
        "constraint.pairs": ";".join(f"{p.j}{p.k}" for p in c.pairs),
    }
    for k, v in asdict(cfg.solver).items():
        if k != "constraint":
            echo[f"solver.{k}"] = str(v)
    echo["control.amplitude"] = _fmt(cfg.constant_amplitude)
    return echo


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunSummary:
    """Run ``cfg.mode`` and write its output files; returns the summary."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = cfg.model()
    pairs = cfg.solver.constraint.pairs
    rho0 = np.asarray(cfg.rho0)
    start = time.perf_counter()
    if cfg.mode == "optimize":
        res = sweep(
            model,
            rho0,
            cfg.grid.control_grid(),
            cfg.solver,
            callback=lambda it, metric, *_: log.info("iteration %d  metric %.3e", it, metric),
        )
        traj, grid = res.trajectory, res.controls
        iterations, converged = res.iterations, res.converged
        write_timeseries(traj, res.adjoint, grid, res.multipliers, out, pairs)
        write_convergence(res.convergence_history, out / "convergence.csv")
        if not converged:
            log.warning("stopped after %d iterations without meeting the tolerances", iterations)
    else:
        value = 0.0 if cfg.mode == "free" else cfg.constant_amplitude
        grid = cfg.grid.control_grid(value)
        traj = integrate_forward(model, rho0, grid)
        iterations, converged = 0, True
        write_timeseries(traj, None, grid, None, out, pairs)
    elapsed = time.perf_counter() - start
    c = np.sqrt(coherence_squared_path(traj, pairs))
    summary = RunSummary(
        mode=cfg.mode,
        parameters=parameter_echo(cfg),
        cost=cost(grid),
        c_initial=float(c[0]),
        c_final=float(c[-1]),
        c_min=float(c.min()),
        c_max=float(c.max()),
        iterations=iterations,
        converged=converged,
        wall_seconds=elapsed,
    )
    summary.write(out / "summary.txt")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coherence-control",
        description="Free decay, constant drive and coherence-constrained minimum-energy control of a qutrit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, mode in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {mode.replace('_', ' ')} experiment")
        p.add_argument("--config", type=Path, help="TOML config file; omitted fields take the defaults")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--steps", type=int, help="number of time steps (overrides grid.steps)")
        if mode == "optimize":
            p.add_argument("--max-iters", type=int, help="sweep iteration cap (overrides solver.max_iters)")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return parser


def _configure(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else paper_defaults()
    cfg = replace(cfg, mode=SUBCOMMANDS[args.command])
    if args.steps is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, steps=args.steps))
    if getattr(args, "max_iters", None) is not None:
        cfg = replace(cfg, solver=replace(cfg.solver, max_iters=args.max_iters))
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _configure(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(cfg)
    except InfeasibleStart as exc:
        print(f"error: infeasible initial state: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NonFiniteIterate, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info(
        "%s: J = %.6g, C in [%.6f, %.6f], outputs in %s",
        summary.mode, summary.cost, summary.c_min, summary.c_max, cfg.output_dir,
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
