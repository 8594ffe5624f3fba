"""Drift + control-operator assembly for both gate families.

Everything downstream works with the linearized form
``H(t) = H0 + sum_i chi_i(t) H_i`` where each physical Rabi channel
contributes a real (re) and optionally an imaginary (im) quadrature operator:

    (Omega/2)|a><b| + h.c.  =  Re(Omega) * H_re + Im(Omega) * H_im
    H_re = (|a><b| + |b><a|)/2,   H_im = (i|a><b| - i|b><a|)/2

Spontaneous emission from |r> enters as a non-Hermitian diagonal
``-i (gamma_r/2) |r><r|`` per atom (amplitude decays as exp(-gamma t/2), so
the norm deficit equals the scattering probability).  The decay prefactor is
switchable because sign/factor conventions for the printed decay term differ;
``half`` is the physically meaningful default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .register import AtomRegister
from .validation import check_grid_length

__all__ = [
    "TransitionSpec",
    "DriftParams",
    "ControlOperator",
    "ControlDecomposition",
    "NoiseView",
    "build_decomposition",
    "build_fredkin_hamiltonian",
    "build_two_photon_hamiltonian",
    "apply_noise_perturbation",
]


@dataclass(frozen=True)
class TransitionSpec:
    """One laser channel: which atoms it addresses and which pair of levels.

    The coupling term is (Omega/2)|to><from| + h.c., matching the convention
    that a channel named for the excitation writes the raising operator first.
    """

    channel: str
    atoms: tuple[int, ...]
    from_level: str
    to_level: str

    def __post_init__(self):
        if self.from_level == self.to_level:
            raise ValueError("transition must connect two distinct levels")


@dataclass(frozen=True)
class DriftParams:
    """Static Hamiltonian parameters, all angular rates (rad/s)."""

    gamma_r_rad: float = 0.0
    delta_rad: float = 0.0  # intermediate-state detuning (two-photon scheme)
    gamma_p_rad: float = 0.0
    per_atom_detunings_rad: tuple[float, ...] | None = None
    decay_convention: str = "half"  # {"half": -i*g/2, "full": -i*g}

    def __post_init__(self):
        if self.gamma_r_rad < 0 or self.gamma_p_rad < 0:
            raise ValueError("decay rates must be >= 0")
        if self.decay_convention not in ("half", "full"):
            raise ValueError("decay_convention must be 'half' or 'full'")

    @property
    def decay_prefactor(self) -> float:
        return 0.5 if self.decay_convention == "half" else 1.0


@dataclass(frozen=True)
class ControlOperator:
    channel: str
    quadrature: str  # "re" or "im"
    matrix: np.ndarray


@dataclass(frozen=True)
class ControlDecomposition:
    """Drift operator plus ordered control operators on one register.

    ``h0 == h_static + sum_pairs v * diag(pair_occupancy)`` exactly; the split
    pieces exist so a noise realization can rescale interactions and shift the
    Rydberg diagonal without rebuilding operators.
    """

    register: AtomRegister
    h0: np.ndarray
    controls: tuple[ControlOperator, ...]
    h_static: np.ndarray  # detunings + decay, no interactions
    pair_terms: tuple[tuple[tuple[int, int], float, np.ndarray], ...]  # (pair, V, diag)
    rydberg_occupancy: np.ndarray  # (n_atoms, dim)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def channel_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for op in self.controls:
            if op.channel not in seen:
                seen.append(op.channel)
        return tuple(seen)

    def hamiltonian(self, field_values) -> np.ndarray:
        """Assemble H = H0 + sum_i chi_i H_i for one vector of field values."""
        h = self.h0.copy()
        for chi, op in zip(np.asarray(field_values, dtype=float), self.controls):
            if chi != 0.0:
                h += chi * op.matrix
        return h

    def control_matrices(self) -> np.ndarray:
        return np.stack([op.matrix for op in self.controls])


def _single_atom_projector_diag(register: AtomRegister, atom: int, level: str) -> np.ndarray:
    return register.level_occupancy(level)[atom]


def _transition_operator(register: AtomRegister, spec: TransitionSpec) -> np.ndarray:
    """sum over addressed atoms of |to><from| embedded in the product space."""
    dim = register.dim
    n_lv = register.scheme.n_levels
    i_from = register.scheme.index(spec.from_level)
    i_to = register.scheme.index(spec.to_level)
    op = np.zeros((dim, dim), dtype=complex)
    for atom in spec.atoms:
        stride = n_lv ** (register.n_atoms - 1 - atom)
        for k in range(dim):
            if (k // stride) % n_lv == i_from:
                op[k + (i_to - i_from) * stride, k] += 1.0
    return op


def build_decomposition(
    register: AtomRegister,
    transitions,
    drift: DriftParams,
    *,
    optimize_phase: bool = True,
) -> ControlDecomposition:
    """Generic assembler: one re (and optionally im) operator per channel."""
    dim = register.dim
    scheme = register.scheme

    controls: list[ControlOperator] = []
    seen = set()
    for spec in transitions:
        key = (spec.atoms, frozenset((spec.from_level, spec.to_level)))
        if key in seen:
            raise ValueError(f"duplicate transition for channel {spec.channel!r}")
        seen.add(key)
        raising = _transition_operator(register, spec)
        h_re = (raising + raising.conj().T) / 2.0
        controls.append(ControlOperator(spec.channel, "re", h_re))
        if optimize_phase:
            h_im = (1j * raising - 1j * raising.conj().T) / 2.0
            controls.append(ControlOperator(spec.channel, "im", h_im))

    ryd_occ = register.level_occupancy(scheme.rydberg_level)

    h_static_diag = np.zeros(dim, dtype=complex)
    pref = drift.decay_prefactor
    if drift.gamma_r_rad:
        h_static_diag -= 1j * pref * drift.gamma_r_rad * ryd_occ.sum(axis=0)
    if scheme.intermediate_level is not None:
        p_occ = register.level_occupancy(scheme.intermediate_level).sum(axis=0)
        h_static_diag += drift.delta_rad * p_occ
        if drift.gamma_p_rad:
            h_static_diag -= 1j * pref * drift.gamma_p_rad * p_occ
    if drift.per_atom_detunings_rad is not None:
        if len(drift.per_atom_detunings_rad) != register.n_atoms:
            raise ValueError("per_atom_detunings_rad needs one entry per atom")
        for atom, det in enumerate(drift.per_atom_detunings_rad):
            h_static_diag += det * ryd_occ[atom]
    h_static = np.diag(h_static_diag)

    pair_terms = []
    h0 = h_static.copy()
    for (i, j), v in sorted(register.pair_interactions_rad.items()):
        pair_diag = ryd_occ[i] * ryd_occ[j]
        pair_terms.append(((i, j), v, pair_diag))
        h0 += v * np.diag(pair_diag)

    return ControlDecomposition(
        register=register,
        h0=h0,
        controls=tuple(controls),
        h_static=h_static,
        pair_terms=tuple(pair_terms),
        rydberg_occupancy=ryd_occ,
    )


def build_fredkin_hamiltonian(
    register: AtomRegister,
    drift: DriftParams,
    *,
    optimize_phase: bool = False,
) -> ControlDecomposition:
    """Controlled-swap Hamiltonian: Omega_p rotates the targets between the
    qubit states, Omega_r couples |1> to |r> on every atom, and equal pair
    interactions shift doubly-excited Rydberg states out of resonance.
    """
    scheme = register.scheme
    if scheme.intermediate_level is not None:
        raise ValueError("controlled-swap scheme uses the three-level ladder {0,1,r}")
    if len(register.control_atoms) != 1 or len(register.target_atoms) != 2:
        raise ValueError(
            "controlled-swap register needs exactly 1 control and 2 target atoms, "
            f"got roles {register.roles}"
        )
    lv0, lv1 = scheme.computational_levels
    transitions = (
        TransitionSpec("Omega_p", register.target_atoms, from_level=lv1, to_level=lv0),
        TransitionSpec(
            "Omega_r",
            tuple(range(register.n_atoms)),
            from_level=lv1,
            to_level=scheme.rydberg_level,
        ),
    )
    return build_decomposition(register, transitions, drift, optimize_phase=optimize_phase)


def build_two_photon_hamiltonian(
    register: AtomRegister,
    drift: DriftParams,
    *,
    optimize_phase: bool = True,
) -> ControlDecomposition:
    """Global two-photon ladder: Omega_1 couples |1>-|p>, Omega_2 couples
    |p>-|r| on every atom, with the intermediate detuning Delta on |p>.
    """
    scheme = register.scheme
    if scheme.intermediate_level is None:
        raise ValueError("two-photon scheme needs an intermediate level in the scheme")
    lv0, lv1 = scheme.computational_levels
    all_atoms = tuple(range(register.n_atoms))
    transitions = (
        TransitionSpec("Omega_1", all_atoms, from_level=scheme.intermediate_level, to_level=lv1),
        TransitionSpec(
            "Omega_2",
            all_atoms,
            from_level=scheme.intermediate_level,
            to_level=scheme.rydberg_level,
        ),
    )
    return build_decomposition(register, transitions, drift, optimize_phase=optimize_phase)


@dataclass(frozen=True)
class NoiseView:
    """Per-timestep view of a decomposition under one noise realization.

    The view is value-like: it never mutates the decomposition, so independent
    Monte-Carlo runs can evaluate views concurrently.

    Per step k the effective Hamiltonian is

        H_k = H_static + sum_pairs s_ij V_ij diag_ij
              + sum_atoms (doppler_a[k] + common_detuning[k]) diag(P_r^a)
              + sum_l (1 + rin[k]) chi_l(t_k) H_l
    """

    decomp: ControlDecomposition
    n_steps: int
    rin_factors: np.ndarray | None = None  # (n_steps,)
    common_detuning_rad: np.ndarray | None = None  # (n_steps,)
    doppler_rad: np.ndarray | None = None  # (n_atoms,) or (n_steps, n_atoms)
    v_scale: float | np.ndarray = 1.0  # scalar or one factor per pair term
    _h0_run: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.rin_factors is not None:
            check_grid_length(self.rin_factors, self.n_steps, "rin_factors")
        if self.common_detuning_rad is not None:
            check_grid_length(self.common_detuning_rad, self.n_steps, "common_detuning_rad")
        if self.doppler_rad is not None:
            dop = np.asarray(self.doppler_rad, dtype=float)
            n_atoms = self.decomp.register.n_atoms
            if dop.ndim == 1:
                if dop.shape != (n_atoms,):
                    raise ValueError("per-run doppler needs one detuning per atom")
            elif dop.shape != (self.n_steps, n_atoms):
                raise ValueError("per-step doppler must be (n_steps, n_atoms)")
            object.__setattr__(self, "doppler_rad", dop)
        scales = np.broadcast_to(
            np.asarray(self.v_scale, dtype=float), (len(self.decomp.pair_terms),)
        )
        h0_run = self.decomp.h_static.copy()
        for s, (_, v, diag) in zip(scales, self.decomp.pair_terms):
            h0_run += (s * v) * np.diag(diag)
        object.__setattr__(self, "_h0_run", h0_run)

    def field_scale(self, k: int) -> float:
        if self.rin_factors is None:
            return 1.0
        return 1.0 + float(self.rin_factors[k])

    def diagonal_shift(self, k: int) -> np.ndarray | None:
        occ = self.decomp.rydberg_occupancy
        shift = None
        if self.common_detuning_rad is not None:
            shift = self.common_detuning_rad[k] * occ.sum(axis=0)
        if self.doppler_rad is not None:
            dop = self.doppler_rad if self.doppler_rad.ndim == 1 else self.doppler_rad[k]
            contrib = dop @ occ
            shift = contrib if shift is None else shift + contrib
        return shift

    def hamiltonian(self, k: int, field_values) -> np.ndarray:
        h = self._h0_run.copy()
        shift = self.diagonal_shift(k)
        if shift is not None:
            h[np.diag_indices_from(h)] += shift
        scale = self.field_scale(k)
        for chi, op in zip(np.asarray(field_values, dtype=float), self.decomp.controls):
            if chi != 0.0:
                h += (scale * chi) * op.matrix
        return h


def apply_noise_perturbation(
    decomp: ControlDecomposition,
    n_steps: int,
    *,
    rin_factors=None,
    common_detuning_rad=None,
    doppler_rad=None,
    v_scale=1.0,
) -> NoiseView:
    """Bind one noise realization to a decomposition as a per-step view."""
    return NoiseView(
        decomp=decomp,
        n_steps=n_steps,
        rin_factors=None if rin_factors is None else np.asarray(rin_factors, dtype=float),
        common_detuning_rad=(
            None if common_detuning_rad is None else np.asarray(common_detuning_rad, dtype=float)
        ),
        doppler_rad=doppler_rad,
        v_scale=v_scale,
    )
