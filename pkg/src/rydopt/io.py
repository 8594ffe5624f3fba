"""Columnar text formats for pulses, traces, truth tables, trajectories and
noise sweeps.

Every file carries a provenance header (config hash, toolkit version, seed)
and floats are written with shortest round-trip ``repr``, so rewriting a
parsed file reproduces it byte for byte and rerunning a command with the same
config and seed produces byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .gates import FidelityReport, TruthTable
from .optimizer import ConvergenceTrace
from .propagator import Trajectory
from .pulses import ControlField, TimeGrid

__all__ = [
    "PulseFile",
    "write_pulse_file",
    "read_pulse_file",
    "write_trace_file",
    "write_truth_table",
    "write_trajectory",
    "write_report",
    "write_sweep_table",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _provenance(config_sha256: str, seed: int | None) -> list[str]:
    lines = [
        f"# config_sha256: {config_sha256}",
        f"# rydopt_version: {__version__}",
    ]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    return lines


@dataclass(frozen=True)
class PulseFile:
    """Parsed pulse file: grid, per-channel values and raw header lines."""

    grid: TimeGrid
    fields: tuple[ControlField, ...]
    header: tuple[str, ...]

    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)


def write_pulse_file(
    path,
    fields,
    grid: TimeGrid,
    *,
    config_sha256: str = "none",
    seed: int | None = None,
) -> None:
    fields = tuple(fields)
    names = [f.name for f in fields]
    lines = ["# rydopt pulse file v1"]
    lines += _provenance(config_sha256, seed)
    lines += [
        f"# duration_s: {_fmt(grid.duration_s)}",
        f"# n_steps: {grid.n_steps}",
        "# quadrature_convention: re-im",
        "# units: t in s (interval midpoints), values in rad/s",
        "# columns: t " + " ".join(names),
    ]
    t = grid.field_times
    for k in range(grid.n_steps):
        row = [_fmt(t[k])] + [_fmt(f.values[k]) for f in fields]
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pulse_file(path) -> PulseFile:
    header: list[str] = []
    rows: list[list[float]] = []
    names: list[str] | None = None
    duration = None
    n_steps = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            header.append(line)
            body = line[1:].strip()
            if body.startswith("duration_s:"):
                duration = float(body.split(":", 1)[1])
            elif body.startswith("n_steps:"):
                n_steps = int(body.split(":", 1)[1])
            elif body.startswith("columns:"):
                cols = body.split(":", 1)[1].split()
                names = cols[1:]
            continue
        if line.strip():
            rows.append([float(x) for x in line.split()])
    if names is None or duration is None or n_steps is None:
        raise ValueError(f"{path}: missing pulse-file header fields")
    data = np.asarray(rows, dtype=float)
    if data.shape != (n_steps, len(names) + 1):
        raise ValueError(f"{path}: data shape {data.shape} inconsistent with header")
    grid = TimeGrid(duration_s=duration, n_steps=n_steps)
    fields = []
    for i, name in enumerate(names):
        channel, _, quad = name.partition(":")
        fields.append(ControlField(channel, quad or "re", data[:, i + 1]))
    return PulseFile(grid=grid, fields=tuple(fields), header=tuple(header))


def write_trace_file(
    path, trace: ConvergenceTrace, *, config_sha256: str = "none", seed: int | None = None
) -> None:
    lines = ["# rydopt trace file v1"]
    lines += _provenance(config_sha256, seed)
    lines += [
        f"# termination: {trace.reason}",
        "# columns: iteration J_T g_a_int J",
    ]
    for e in trace.entries:
        lines.append(f"{e.iteration} {_fmt(e.j_t)} {_fmt(e.g_a_int)} {_fmt(e.j_total)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_truth_table(
    path, table: TruthTable, *, config_sha256: str = "none", seed: int | None = None
) -> None:
    lines = ["# rydopt truth table v1"]
    lines += _provenance(config_sha256, seed)
    lines += [
        "# P[f, i] = |<f|U|i>|^2; rows are final states f, columns inputs i",
        "# labels: " + " ".join(table.labels),
    ]
    for row in table.probabilities:
        lines.append(" ".join(_fmt(x) for x in row))
    lines.append("# column_deficits: " + " ".join(_fmt(x) for x in table.column_deficits))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory(
    path,
    trajectory: Trajectory,
    *,
    label: str = "",
    config_sha256: str = "none",
    seed: int | None = None,
) -> None:
    register = trajectory.decomp.register
    basis = [
        "".join(register.basis_labels(i)) for i in range(register.dim)
    ]
    lines = ["# rydopt trajectory v1"]
    lines += _provenance(config_sha256, seed)
    if label:
        lines.append(f"# input: {label}")
    lines.append("# columns: t " + " ".join(f"P({b})" for b in basis) + " norm")
    pops = trajectory.basis_populations()
    norms = trajectory.norms
    for k, t in enumerate(trajectory.times):
        row = [_fmt(t)] + [_fmt(x) for x in pops[k]] + [_fmt(norms[k])]
        lines.append(" ".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _report_dict(report: FidelityReport) -> dict:
    out = {
        "fidelity": report.fidelity,
        "infidelity": report.infidelity,
        "fidelity_mean_probability": report.fidelity_mean_probability,
        "fitted_phase_rad": report.fitted_phase_rad,
        "rydberg_time_integral_s": report.rydberg_time_integral_s,
        "inputs": {},
    }
    for j, label in enumerate(report.labels):
        out["inputs"][label] = {
            "overlap_re": report.overlaps[j].real,
            "overlap_im": report.overlaps[j].imag,
            "phase_rad": float(report.input_phases_rad[j]),
            "leakage": float(report.leakage_per_input[j]),
        }
    return out


def write_report(
    path,
    report: FidelityReport,
    *,
    extra: dict | None = None,
    config_sha256: str = "none",
    seed: int | None = None,
) -> None:
    doc = {
        "config_sha256": config_sha256,
        "rydopt_version": __version__,
        "seed": seed,
        "report": _report_dict(report),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_sweep_table(
    path,
    channel: str,
    unit: str,
    rows,
    *,
    config_sha256: str = "none",
    seed: int | None = None,
) -> None:
    """rows: iterable of (value, MonteCarloResult)."""
    lines = ["# rydopt noise sweep v1"]
    lines += _provenance(config_sha256, seed)
    lines += [
        f"# channel: {channel}",
        f"# value_unit: {unit}",
        "# columns: value mean_infidelity std_error n_runs",
    ]
    for value, result in rows:
        lines.append(
            f"{_fmt(value)} {_fmt(result.mean_infidelity)} "
            f"{_fmt(result.std_error)} {result.n_runs}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
