"""Command-line interface: optimize, simulate, truth-table, noise-sweep.

Every command is a pure function of (config, seed): rerunning with identical
inputs produces byte-identical output files.  Exit codes: 0 success, 2 for
configuration/validation errors, 3 for numerical divergence.

The environment variable ``RYDOPT_THREADS`` overrides the Monte-Carlo worker
count (default 1; aggregation is order-independent either way).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .gates import gate_fidelity, rydberg_population_integral, truth_table
from .io import (
    read_pulse_file,
    write_pulse_file,
    write_report,
    write_sweep_table,
    write_trace_file,
    write_trajectory,
    write_truth_table,
)
from .noise import SWEEP_CHANNELS, noise_sweep
from .optimizer import KrotovDivergenceError
from .propagator import evolve_forward
from .pulses import fields_to_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3

_SWEEP_UNITS = {
    "rin": "fractional HWHM",
    "psd-white": "Hz^2/Hz",
    "doppler": "uK",
    "interaction": "nm",
}


def _n_threads() -> int:
    raw = os.environ.get("RYDOPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"RYDOPT_THREADS={raw!r} is not an integer") from None


def _load(config_path: str) -> RunConfig:
    if not Path(config_path).exists():
        raise ConfigError(f"config file not found: {config_path}")
    return load_config(config_path)


def _check_pulse_grid(pulse_grid, grid) -> None:
    if pulse_grid.n_steps != grid.n_steps or not np.isclose(
        pulse_grid.duration_s, grid.duration_s, rtol=1e-12, atol=0.0
    ):
        raise ConfigError(
            f"pulse grid (T={pulse_grid.duration_s}, n={pulse_grid.n_steps}) does not "
            f"match config grid (T={grid.duration_s}, n={grid.n_steps})"
        )


def cmd_optimize(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    decomp = cfg.decomposition()
    grid = cfg.grid()
    problem = cfg.problem(decomp, grid)
    optimizer = cfg.optimizer()
    optimizer.fit(problem)

    seed = cfg.seed
    write_pulse_file(
        out / "pulses.txt", optimizer.fields_, grid, config_sha256=cfg.sha256, seed=seed
    )
    write_trace_file(out / "trace.txt", optimizer.trace_, config_sha256=cfg.sha256, seed=seed)

    gate = cfg.gate()
    extra = {
        "final_j_t": optimizer.j_t_,
        "iterations": optimizer.n_iter_,
        "termination": optimizer.trace_.reason,
        "functional": optimizer.functional,
    }
    if gate is not None:
        trajectories = [
            evolve_forward(decomp, optimizer.field_matrix_, grid, problem.initial_states[:, j])
            for j in range(problem.n_objectives)
        ]
        tbar = rydberg_population_integral(trajectories)
        report = gate_fidelity(
            optimizer.final_states_, gate, decomp.register, rydberg_time_integral_s=tbar
        )
        write_report(
            out / "report.json", report, extra=extra, config_sha256=cfg.sha256, seed=seed
        )
        print(
            f"optimize: J_T = {optimizer.j_t_:.6g} after {optimizer.n_iter_} iterations "
            f"({optimizer.trace_.reason}); fidelity = {report.fidelity:.6f}, "
            f"Rydberg time = {tbar * 1e6:.4f} us -> {out}"
        )
    else:
        (out / "report.json").write_text(
            __import__("json").dumps(
                {"config_sha256": cfg.sha256, "seed": seed, **extra}, indent=2, sort_keys=True
            )
            + "\n"
        )
        print(
            f"optimize: J_T = {optimizer.j_t_:.6g} after {optimizer.n_iter_} iterations "
            f"({optimizer.trace_.reason}) -> {out}"
        )
    return EXIT_OK


def _simulate(cfg: RunConfig, pulse_path: str):
    decomp = cfg.decomposition()
    grid = cfg.grid()
    pulses = read_pulse_file(pulse_path)
    _check_pulse_grid(pulses.grid, grid)
    try:
        matrix = fields_to_matrix(pulses.fields, decomp, grid)
    except ValueError as err:
        raise ConfigError(f"pulse file does not match the configured channels: {err}") from err
    gate = cfg.gate()
    if gate is None:
        raise ConfigError("simulate needs a gate target (not a transfer problem)")
    register = decomp.register
    comp = register.computational_indices()
    trajectories = []
    for idx in comp:
        psi0 = np.zeros(register.dim, dtype=complex)
        psi0[idx] = 1.0
        trajectories.append(evolve_forward(decomp, matrix, grid, psi0))
    finals = np.stack([tr.final_state for tr in trajectories], axis=1)
    table = truth_table(finals, register)
    tbar = rydberg_population_integral(trajectories)
    report = gate_fidelity(finals, gate, register, rydberg_time_integral_s=tbar)
    return decomp, grid, trajectories, table, report


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, _, trajectories, table, report = _simulate(cfg, args.pulses)
    seed = cfg.seed
    write_truth_table(out / "truth_table.txt", table, config_sha256=cfg.sha256, seed=seed)
    write_report(out / "report.json", report, config_sha256=cfg.sha256, seed=seed)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for label, trajectory in zip(table.labels, trajectories):
        write_trajectory(
            traj_dir / f"input_{label}.txt",
            trajectory,
            label=label,
            config_sha256=cfg.sha256,
            seed=seed,
        )
    print(
        f"simulate: fidelity = {report.fidelity:.6f} "
        f"(mean-probability {report.fidelity_mean_probability:.6f}), "
        f"Rydberg time = {report.rydberg_time_integral_s * 1e6:.4f} us -> {out}"
    )
    return EXIT_OK


def cmd_truth_table(args) -> int:
    cfg = _load(args.config)
    _, _, _, table, _ = _simulate(cfg, args.pulses)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_truth_table(out, table, config_sha256=cfg.sha256, seed=cfg.seed)
        print(f"truth-table -> {out}")
    else:
        print("inputs:  " + " ".join(table.labels))
        for label, row in zip(table.labels, table.probabilities):
            print(f"{label}:  " + " ".join(f"{p:.4f}" for p in row))
    return EXIT_OK


def cmd_noise_sweep(args) -> int:
    cfg = _load(args.config)
    if args.channel not in SWEEP_CHANNELS:
        raise ConfigError(f"unknown channel {args.channel!r}; choose from {SWEEP_CHANNELS}")
    decomp = cfg.decomposition()
    grid = cfg.grid()
    pulses = read_pulse_file(args.pulses)
    _check_pulse_grid(pulses.grid, grid)
    matrix = fields_to_matrix(pulses.fields, decomp, grid)
    gate = cfg.gate()
    if gate is None:
        raise ConfigError("noise-sweep needs a gate target")
    seed = args.seed if args.seed is not None else cfg.seed
    n_runs = args.runs if args.runs is not None else cfg.n_runs
    rows = noise_sweep(
        decomp,
        matrix,
        grid,
        gate,
        cfg.noise_model(),
        args.channel,
        args.values,
        n_runs=n_runs,
        seed=seed,
        n_threads=_n_threads(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_table(
        out,
        args.channel,
        _SWEEP_UNITS[args.channel],
        rows,
        config_sha256=cfg.sha256,
        seed=seed,
    )
    for value, result in rows:
        print(
            f"{args.channel} = {value:g}: infidelity = {result.mean_infidelity:.6g} "
            f"+- {result.std_error:.2g} ({result.n_runs} runs)"
        )
    print(f"noise-sweep -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydopt",
        description="Krotov pulse optimization and noise analysis for Rydberg gates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="optimize pulses for the configured problem")
    p_opt.add_argument("--config", required=True)
    p_opt.add_argument("--out", required=True)
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="simulate a pulse file against the config")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--pulses", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_tt = sub.add_parser("truth-table", help="print or write just the truth table")
    p_tt.add_argument("--config", required=True)
    p_tt.add_argument("--pulses", required=True)
    p_tt.add_argument("--out")
    p_tt.set_defaults(func=cmd_truth_table)

    p_ns = sub.add_parser("noise-sweep", help="Monte-Carlo infidelity vs a noise parameter")
    p_ns.add_argument("--config", required=True)
    p_ns.add_argument("--pulses", required=True)
    p_ns.add_argument("--channel", required=True)
    p_ns.add_argument("--values", required=True, nargs="+", type=float)
    p_ns.add_argument("--out", required=True)
    p_ns.add_argument("--runs", type=int)
    p_ns.add_argument("--seed", type=int)
    p_ns.set_defaults(func=cmd_noise_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except KrotovDivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
