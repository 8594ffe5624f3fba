"""Conventional-gate baseline for the Rydberg-time comparison.

A circuit-model controlled swap costs 8 C-NOTs.  Each C-NOT's Rydberg budget
is that of a blockade CZ driven by Gaussian pulses in the pi - 2pi - pi
arrangement: the control is excited to |r> by a Gaussian pi pulse, the target
sees a Gaussian 2pi Rydberg pulse inside the gap, and a final pi pulse returns
the control.  The single-qubit rotations completing the C-NOT never touch the
Rydberg level, so the CZ accounts for the full Rydberg time.
"""

from __future__ import annotations

import math

import numpy as np

from .gates import rydberg_population_integral
from .hamiltonian import DriftParams, TransitionSpec, build_decomposition
from .propagator import evolve_forward
from .pulses import TimeGrid
from .register import THREE_LEVEL, build_register

__all__ = ["gaussian_cz_rydberg_time", "FREDKIN_CNOT_COUNT"]

FREDKIN_CNOT_COUNT = 8


def _gaussian(t, center, sigma, peak):
    return peak * np.exp(-((t - center) ** 2) / (2.0 * sigma**2))


def gaussian_cz_rydberg_time(
    *,
    peak_rad: float,
    v_rad: float,
    gamma_r_rad: float = 0.0,
    n_steps: int = 1500,
) -> float:
    """Input-averaged time-integrated Rydberg population of one Gaussian-pulse
    blockade CZ (seconds).

    Pulse widths follow from the areas: the pi pulses have
    sigma = pi / (peak sqrt(2 pi)), the 2pi pulse twice that.  Windows are
    +-4 sigma so the areas are complete to <1e-4.
    """
    reg = build_register(2, THREE_LEVEL, ["control", "target"], v_rad=v_rad)
    dec = build_decomposition(
        reg,
        (
            TransitionSpec("Omega_rc", (0,), from_level="1", to_level="r"),
            TransitionSpec("Omega_rt", (1,), from_level="1", to_level="r"),
        ),
        DriftParams(gamma_r_rad=gamma_r_rad),
        optimize_phase=False,
    )
    sigma_pi = math.pi / (peak_rad * math.sqrt(2.0 * math.pi))
    sigma_2pi = 2.0 * sigma_pi
    w_pi, w_2pi = 8.0 * sigma_pi, 8.0 * sigma_2pi
    total = 2.0 * w_pi + w_2pi
    grid = TimeGrid(total, n_steps)
    t = grid.field_times
    omega_c = _gaussian(t, w_pi / 2.0, sigma_pi, peak_rad) + _gaussian(
        t, total - w_pi / 2.0, sigma_pi, peak_rad
    )
    omega_t = _gaussian(t, w_pi + w_2pi / 2.0, sigma_2pi, peak_rad)
    fields = np.vstack([omega_c, omega_t])

    trajectories = []
    for bits in ("00", "01", "10", "11"):
        trajectories.append(evolve_forward(dec, fields, grid, reg.basis_state(bits)))
    return rydberg_population_integral(trajectories)
