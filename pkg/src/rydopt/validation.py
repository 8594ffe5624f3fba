"""Input validation helpers shared across the toolkit."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_finite",
    "check_state_vector",
    "check_square_operator",
    "check_grid_length",
]


def check_finite(arr, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if np.iscomplexobj(arr):
        finite = np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))
    else:
        finite = np.all(np.isfinite(arr))
    if not finite:
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_state_vector(psi, dim: int, name: str = "state") -> np.ndarray:
    """Validate a state vector (or a (dim, m) block of column states)."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != dim:
        raise ValueError(f"{name} has dimension {psi.shape[0]}, expected {dim}")
    check_finite(psi, name)
    norms = np.linalg.norm(psi, axis=0)
    if np.any(norms > 1.0 + 1e-9):
        raise ValueError(f"{name} has norm {norms.max():.12f} > 1 + 1e-9")
    return psi


def check_square_operator(op, dim: int, name: str = "operator") -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (dim, dim):
        raise ValueError(f"{name} has shape {op.shape}, expected {(dim, dim)}")
    check_finite(op, name)
    return op


def check_grid_length(arr, n_steps: int, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.shape[0] != n_steps:
        raise ValueError(
            f"{name} has length {arr.shape[0]}, expected n_steps={n_steps}"
        )
    return arr
