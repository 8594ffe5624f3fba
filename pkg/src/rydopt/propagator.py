"""Exact piecewise-constant propagation of state vectors and co-states.

Each step applies the dense exponential U_k = exp(-i H(t_k) dt) (scipy
scaling-and-squaring; eigendecomposition when H is Hermitian).  Co-states
propagate with the exact adjoint exp(+i H^dag dt) = U_k^dag, which keeps
<chi(t)|psi(t)> constant to round-off even with non-Hermitian decay -- the
property Krotov correctness rests on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .hamiltonian import ControlDecomposition, NoiseView
from .pulses import TimeGrid, fields_to_matrix
from .validation import check_finite, check_state_vector

__all__ = [
    "Trajectory",
    "step",
    "step_operator",
    "evolve_forward",
    "evolve_backward",
]

_HERMITIAN_TOL = 1e-12


def step_operator(h: np.ndarray, dt: float) -> np.ndarray:
    """U = exp(-i h dt) for one piecewise-constant interval."""
    scale = np.max(np.abs(h))
    if scale == 0.0:
        return np.eye(h.shape[0], dtype=complex)
    if np.max(np.abs(h - h.conj().T)) <= _HERMITIAN_TOL * scale:
        w, v = np.linalg.eigh(h)
        return (v * np.exp(-1j * dt * w)) @ v.conj().T
    return sla.expm(-1j * dt * h)


def step(h: np.ndarray, dt: float, psi: np.ndarray) -> np.ndarray:
    """Advance a state (or a (dim, m) block) by one exact step."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    h = check_finite(np.asarray(h, dtype=complex), "hamiltonian")
    psi = check_state_vector(psi, h.shape[0])
    return step_operator(h, dt) @ psi


@dataclass
class Trajectory:
    """Recorded evolution of one initial state.

    ``states`` has shape (n_steps+1, dim); populations are derived from the
    register's occupancy tables so callers never touch basis indices directly.
    """

    grid: TimeGrid
    states: np.ndarray
    decomp: ControlDecomposition

    @property
    def times(self) -> np.ndarray:
        return self.grid.state_times

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def basis_populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def population(self, level: str, atom: int | None = None) -> np.ndarray:
        """Occupation time series of ``level``; summed over atoms (expected
        number of atoms in the level) unless a specific atom is given."""
        occ = self.decomp.register.level_occupancy(level)
        weights = occ[atom] if atom is not None else occ.sum(axis=0)
        return self.basis_populations() @ weights

    def rydberg_population(self) -> np.ndarray:
        return self.population(self.decomp.register.scheme.rydberg_level)


def _field_matrix(decomp, fields, grid):
    mat = fields_to_matrix(fields, decomp, grid)
    check_finite(mat, "fields")
    return mat


def _forward_block(
    decomp: ControlDecomposition,
    field_matrix: np.ndarray,
    grid: TimeGrid,
    states0: np.ndarray,
    noise: NoiseView | None = None,
    *,
    store_states: bool = True,
    store_operators: bool = False,
):
    """Propagate a (dim, m) block forward; optionally keep per-step operators."""
    dt = grid.dt
    controls = decomp.control_matrices()
    psi = states0.astype(complex, copy=True)
    states = None
    if store_states:
        states = np.empty((grid.n_steps + 1, *psi.shape), dtype=complex)
        states[0] = psi
    operators = [] if store_operators else None
    for k in range(grid.n_steps):
        if noise is None:
            h = decomp.h0 + np.tensordot(field_matrix[:, k], controls, axes=1)
        else:
            h = noise.hamiltonian(k, field_matrix[:, k])
        u = step_operator(h, dt)
        psi = u @ psi
        if store_states:
            states[k + 1] = psi
        if store_operators:
            operators.append(u)
    return psi, states, operators


def _backward_block(
    decomp: ControlDecomposition,
    field_matrix: np.ndarray,
    grid: TimeGrid,
    chi_final: np.ndarray,
    noise: NoiseView | None = None,
    *,
    step_operators=None,
    store_states: bool = True,
):
    """Propagate co-states backward with exp(+i H^dag dt) = U^dag per step.

    ``step_operators`` may pass the forward operators of the same field so
    the adjoint pairing is exact to round-off.
    """
    dt = grid.dt
    controls = decomp.control_matrices()
    chi = chi_final.astype(complex, copy=True)
    states = None
    if store_states:
        states = np.empty((grid.n_steps + 1, *chi.shape), dtype=complex)
        states[-1] = chi
    for k in range(grid.n_steps - 1, -1, -1):
        if step_operators is not None:
            u = step_operators[k]
        else:
            if noise is None:
                h = decomp.h0 + np.tensordot(field_matrix[:, k], controls, axes=1)
            else:
                h = noise.hamiltonian(k, field_matrix[:, k])
            u = step_operator(h, dt)
        chi = u.conj().T @ chi
        if store_states:
            states[k] = chi
    return chi, states


def evolve_forward(
    decomp: ControlDecomposition,
    fields,
    grid: TimeGrid,
    psi0: np.ndarray,
    noise: NoiseView | None = None,
) -> Trajectory:
    """Full forward trajectory of one initial state."""
    psi0 = check_state_vector(np.asarray(psi0, dtype=complex), decomp.dim, "psi0")
    mat = _field_matrix(decomp, fields, grid)
    if noise is not None and noise.n_steps != grid.n_steps:
        raise ValueError("noise realization grid length does not match the time grid")
    _, states, _ = _forward_block(decomp, mat, grid, psi0, noise)
    return Trajectory(grid=grid, states=states, decomp=decomp)


def evolve_backward(
    decomp: ControlDecomposition,
    fields,
    grid: TimeGrid,
    chi_final: np.ndarray,
    noise: NoiseView | None = None,
) -> Trajectory:
    """Full backward (adjoint) trajectory from the t = T boundary co-state."""
    chi_final = np.asarray(chi_final, dtype=complex)
    check_finite(chi_final, "chi_final")
    if chi_final.shape[0] != decomp.dim:
        raise ValueError("co-state dimension mismatch")
    mat = _field_matrix(decomp, fields, grid)
    _, states = _backward_block(decomp, mat, grid, chi_final, noise)
    return Trajectory(grid=grid, states=states, decomp=decomp)
