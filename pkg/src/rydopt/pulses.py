"""Control fields, update shapes and initial-guess envelopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_finite, check_grid_length

__all__ = [
    "TimeGrid",
    "ControlField",
    "flattop_update_shape",
    "gaussian_envelope",
    "fields_to_matrix",
    "amplitude_phase",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid; controls are constant on [t_k, t_{k+1}).

    Field samples live at interval midpoints (``field_times``), states on the
    n_steps+1 grid points (``state_times``).  Midpoint sampling of a smooth
    field makes the piecewise-constant propagator second-order accurate.
    """

    duration_s: float
    n_steps: int

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be > 0")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")

    @property
    def dt(self) -> float:
        return self.duration_s / self.n_steps

    @property
    def state_times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration_s, self.n_steps + 1)

    @property
    def field_times(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dt


@dataclass(frozen=True)
class ControlField:
    """Sampled values of one control quadrature on a TimeGrid.

    Values are angular rates (rad/s) for re/im quadratures.  ``amplitude``
    representation (always >= 0) is available as a view via
    :func:`amplitude_phase`; the optimizer works on re/im.
    """

    channel: str
    quadrature: str  # "re" or "im"
    values: np.ndarray
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.quadrature not in ("re", "im"):
            raise ValueError("quadrature must be 're' or 'im'")
        vals = np.asarray(self.values, dtype=float)
        check_finite(vals, f"field {self.channel}:{self.quadrature}")
        object.__setattr__(self, "values", vals)
        if self.bounds is not None and self.bounds[0] > self.bounds[1]:
            raise ValueError("bounds must be (min, max) with min <= max")

    @property
    def name(self) -> str:
        return f"{self.channel}:{self.quadrature}"


def fields_to_matrix(fields, decomp, grid: TimeGrid) -> np.ndarray:
    """Stack fields into a (n_controls, n_steps) array ordered like
    ``decomp.controls``; accepts a ready array or ControlField objects."""
    if isinstance(fields, np.ndarray):
        mat = np.asarray(fields, dtype=float)
        if mat.shape != (decomp.n_controls, grid.n_steps):
            raise ValueError(
                f"field matrix has shape {mat.shape}, expected "
                f"{(decomp.n_controls, grid.n_steps)}"
            )
        return mat
    by_name = {}
    for f in fields:
        check_grid_length(f.values, grid.n_steps, f.name)
        if f.name in by_name:
            raise ValueError(f"duplicate field {f.name}")
        by_name[f.name] = f.values
    rows = []
    for op in decomp.controls:
        key = f"{op.channel}:{op.quadrature}"
        if key not in by_name:
            raise ValueError(f"missing field for control operator {key}")
        rows.append(by_name.pop(key))
    if by_name:
        raise ValueError(f"fields {sorted(by_name)} have no matching control operator")
    return np.asarray(rows, dtype=float)


def flattop_update_shape(grid: TimeGrid, edge_fraction: float = 0.05) -> np.ndarray:
    """Flat-top S(t) in [0, 1] with sine-squared switch-on/off ramps.

    The first and last samples are pinned to exactly zero so the field
    endpoints never move during optimization.
    """
    if not (0.0 <= edge_fraction < 0.5):
        raise ValueError("edge_fraction must be in [0, 0.5)")
    t = grid.field_times
    total = grid.duration_s
    s = np.ones(grid.n_steps)
    if edge_fraction > 0.0:
        t_rise = edge_fraction * total
        rising = t < t_rise
        s[rising] = np.sin(np.pi * t[rising] / (2.0 * t_rise)) ** 2
        falling = t > total - t_rise
        s[falling] = np.sin(np.pi * (total - t[falling]) / (2.0 * t_rise)) ** 2
    s[0] = 0.0
    s[-1] = 0.0
    return s


def gaussian_envelope(
    grid: TimeGrid,
    peak_rad: float,
    *,
    center_fraction: float = 0.5,
    sigma_fraction: float = 1.0 / 6.0,
) -> np.ndarray:
    """Gaussian amplitude envelope sampled on the field grid (rad/s)."""
    t = grid.field_times
    t0 = center_fraction * grid.duration_s
    sigma = sigma_fraction * grid.duration_s
    return peak_rad * np.exp(-((t - t0) ** 2) / (2.0 * sigma**2))


def amplitude_phase(re_values, im_values) -> tuple[np.ndarray, np.ndarray]:
    """Convert re/im quadratures to (amplitude >= 0, phase in (-pi, pi])."""
    z = np.asarray(re_values, dtype=float) + 1j * np.asarray(im_values, dtype=float)
    return np.abs(z), np.angle(z)
