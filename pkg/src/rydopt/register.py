"""Multi-atom register: level schemes, product-basis indexing and interactions.

The register fixes the conventions everything else builds on: atom 0 is the
most significant "digit" of the product-basis index, the control atom comes
first, and all pair interactions are stored as angular frequencies (rad/s).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
from scipy import constants as _const

__all__ = [
    "LevelScheme",
    "AtomRegister",
    "PhysicalConstants",
    "CS_CONSTANTS",
    "THREE_LEVEL",
    "FOUR_LEVEL",
    "build_register",
    "cs_rydberg_lifetime_s",
]

MAX_ATOMS = 4


@dataclass(frozen=True)
class LevelScheme:
    """Single-atom level structure shared by every atom in the register.

    ``labels`` is the ordered list of level names; the position in the list is
    the per-atom level index used for basis arithmetic.
    """

    labels: tuple[str, ...]
    computational_levels: tuple[str, str] = ("0", "1")
    rydberg_level: str = "r"
    intermediate_level: str | None = None

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate level labels: {self.labels}")
        for lv in (*self.computational_levels, self.rydberg_level):
            if lv not in self.labels:
                raise ValueError(f"level {lv!r} not in labels {self.labels}")
        if self.rydberg_level in self.computational_levels:
            raise ValueError("rydberg level cannot be a computational level")
        if self.intermediate_level is not None and self.intermediate_level not in self.labels:
            raise ValueError(f"intermediate level {self.intermediate_level!r} not in labels")

    @property
    def n_levels(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown level label {label!r}; scheme has {self.labels}") from None


#: Ground-Rydberg scheme used by the controlled-swap gate.
THREE_LEVEL = LevelScheme(labels=("0", "1", "r"))

#: Two-photon ladder scheme (intermediate state p) used by the C_k-Z gates.
FOUR_LEVEL = LevelScheme(labels=("0", "1", "p", "r"), intermediate_level="p")


@dataclass(frozen=True)
class PhysicalConstants:
    """Atomic constants for the Cs implementation.

    ``k_eff`` is the two-photon effective wavevector for counterpropagating
    beams, 2*pi*|1/lambda1 - 1/lambda2|.  Counterpropagation minimizes the
    two-photon Doppler sensitivity, which is why it is the default here.
    """

    k_B: float = _const.k
    atom_mass_kg: float = 132.905451931 * _const.atomic_mass  # 133Cs
    lambda1_m: float = 459.4e-9
    lambda2_m: float = 1040e-9

    @property
    def k_eff(self) -> float:
        return 2.0 * np.pi * abs(1.0 / self.lambda1_m - 1.0 / self.lambda2_m)

    def v_rms(self, temperature_k: float) -> float:
        """Root-mean-square 1D thermal velocity sqrt(k_B T / M), m/s."""
        if temperature_k < 0:
            raise ValueError("temperature must be >= 0")
        return float(np.sqrt(self.k_B * temperature_k / self.atom_mass_kg))


CS_CONSTANTS = PhysicalConstants()

# Quasiclassical lifetime fit coefficients for Cs nS_1/2 (radiative lifetime
# tau0 = tau_s * n_eff^gamma at 0 K plus a 300 K-style blackbody depopulation
# term).  Used only to produce a documented default for the Rydberg decay rate.
_CS_S_QUANTUM_DEFECT = 4.0493
_CS_S_TAU_S = 1.368e-9  # s
_CS_S_GAMMA = 2.9992
_CS_S_BBR_A = 0.123
_CS_S_BBR_B = 0.231
_CS_S_BBR_C = 2.517
_CS_S_BBR_D = 4.375


def cs_rydberg_lifetime_s(n: int, environment_temperature_k: float = 300.0) -> float:
    """Estimated lifetime of the Cs nS_1/2 Rydberg level, in seconds.

    Quasiclassical fit: radiative part scales as n_eff^3; the blackbody part
    uses the standard four-parameter depopulation formula.  Good to a few tens
    of percent, which is all the decay-rate default needs.
    """
    if n <= _CS_S_QUANTUM_DEFECT:
        raise ValueError("principal quantum number too small for the nS fit")
    n_eff = n - _CS_S_QUANTUM_DEFECT
    rate = 1.0 / (_CS_S_TAU_S * n_eff**_CS_S_GAMMA)
    if environment_temperature_k > 0:
        x = 315780.0 * _CS_S_BBR_B / (n_eff**_CS_S_BBR_C * environment_temperature_k)
        rate += _CS_S_BBR_A * (2.14e10 / n_eff**_CS_S_BBR_D) / np.expm1(x)
    return 1.0 / rate


@dataclass(frozen=True)
class AtomRegister:
    """Immutable register of up to four identical multi-level atoms.

    Basis indexing is lexicographic with atom 0 most significant:
    ``index = sum_a level_index(a) * n_levels^(n_atoms-1-a)``.
    """

    n_atoms: int
    scheme: LevelScheme
    roles: tuple[str, ...]
    pair_interactions_rad: dict[tuple[int, int], float]
    positions_m: tuple[tuple[float, float, float], ...] | None = None
    c6_rad_m6: float | None = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if not (1 <= self.n_atoms <= MAX_ATOMS):
            raise ValueError(f"n_atoms must be in 1..{MAX_ATOMS}, got {self.n_atoms}")
        if len(self.roles) != self.n_atoms:
            raise ValueError("roles length must equal n_atoms")
        for role in self.roles:
            if role not in ("control", "target"):
                raise ValueError(f"unknown role {role!r}")
        for (i, j), v in self.pair_interactions_rad.items():
            if not (0 <= i < j < self.n_atoms):
                raise ValueError(f"bad pair key {(i, j)}")
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"pair interaction V({i},{j}) must be finite and > 0")

    @property
    def dim(self) -> int:
        return self.scheme.n_levels**self.n_atoms

    @property
    def control_atoms(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == "control")

    @property
    def target_atoms(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == "target")

    # ---- basis arithmetic -------------------------------------------------

    def basis_index(self, per_atom_levels: tuple[str, ...] | str) -> int:
        """Index of the product state given one level label per atom."""
        if len(per_atom_levels) != self.n_atoms:
            raise ValueError("need one level label per atom")
        idx = 0
        for label in per_atom_levels:
            idx = idx * self.scheme.n_levels + self.scheme.index(label)
        return idx

    def basis_labels(self, index: int) -> tuple[str, ...]:
        """Inverse of :meth:`basis_index`."""
        if not (0 <= index < self.dim):
            raise IndexError(f"basis index {index} out of range 0..{self.dim - 1}")
        out = []
        for _ in range(self.n_atoms):
            index, rem = divmod(index, self.scheme.n_levels)
            out.append(self.scheme.labels[rem])
        return tuple(reversed(out))

    def basis_state(self, per_atom_levels: tuple[str, ...] | str) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.basis_index(per_atom_levels)] = 1.0
        return psi

    def level_occupancy(self, level: str) -> np.ndarray:
        """(n_atoms, dim) 0/1 array: atom a occupies ``level`` in basis state k."""
        li = self.scheme.index(level)
        occ = np.zeros((self.n_atoms, self.dim))
        for k, labels in enumerate(product(self.scheme.labels, repeat=self.n_atoms)):
            for a, lab in enumerate(labels):
                if self.scheme.index(lab) == li:
                    occ[a, k] = 1.0
        return occ

    def computational_indices(self) -> np.ndarray:
        """Basis indices of the 2^n computational states, qubit-bitstring order.

        Bitstring order matches basis order (atom 0 is the most significant
        qubit), e.g. for 3 atoms the list is |000>, |001>, ..., |111>.
        """
        lv0, lv1 = self.scheme.computational_levels
        out = []
        for bits in product((lv0, lv1), repeat=self.n_atoms):
            out.append(self.basis_index(bits))
        return np.asarray(out, dtype=int)

    def pair_v(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        return self.pair_interactions_rad[key]


def _pair_interactions_from_geometry(
    positions_m, c6_rad_m6: float
) -> dict[tuple[int, int], float]:
    pos = np.asarray(positions_m, dtype=float)
    table: dict[tuple[int, int], float] = {}
    for i, j in combinations(range(len(pos)), 2):
        r = float(np.linalg.norm(pos[i] - pos[j]))
        if r <= 0:
            raise ValueError(f"atoms {i} and {j} coincide; distance must be > 0")
        table[(i, j)] = c6_rad_m6 / r**6
    return table


def build_register(
    n_atoms: int,
    scheme: LevelScheme,
    roles,
    *,
    v_rad: float | dict[tuple[int, int], float] | None = None,
    c6_rad_m6: float | None = None,
    positions_m=None,
    constants: PhysicalConstants = CS_CONSTANTS,
) -> AtomRegister:
    """Build a validated register.

    Interactions come either from an explicit ``v_rad`` (scalar applied to all
    pairs, or a per-pair dict) or from ``c6_rad_m6`` plus ``positions_m`` with
    V(i,j) = C6 / |x_i - x_j|^6.  All rates are angular (rad/s).
    """
    if n_atoms > MAX_ATOMS:
        raise ValueError(
            f"n_atoms={n_atoms} exceeds the dense-representation limit of {MAX_ATOMS}"
        )
    roles = tuple(roles)
    if c6_rad_m6 is not None:
        if v_rad is not None:
            raise ValueError("give either v_rad or c6_rad_m6, not both")
        if positions_m is None:
            raise ValueError("c6 interaction mode requires atom positions")
        table = _pair_interactions_from_geometry(positions_m, c6_rad_m6)
    elif isinstance(v_rad, dict):
        table = {(min(i, j), max(i, j)): float(v) for (i, j), v in v_rad.items()}
    elif v_rad is not None:
        table = {
            (i, j): float(v_rad) for i, j in combinations(range(n_atoms), 2)
        }
    else:
        if n_atoms > 1:
            raise ValueError("multi-atom register needs v_rad or c6_rad_m6")
        table = {}
    if positions_m is not None:
        positions_m = tuple(tuple(float(x) for x in p) for p in positions_m)
        if len(positions_m) != n_atoms:
            raise ValueError("need one position per atom")
    return AtomRegister(
        n_atoms=n_atoms,
        scheme=scheme,
        roles=roles,
        pair_interactions_rad=table,
        positions_m=positions_m,
        c6_rad_m6=c6_rad_m6,
        constants=constants,
    )


def triangle_positions_m(spacing_m: float) -> tuple[tuple[float, float, float], ...]:
    """Equilateral triangle in the xy plane with the given side length."""
    a = spacing_m
    return (
        (0.0, 0.0, 0.0),
        (a, 0.0, 0.0),
        (a / 2.0, a * np.sqrt(3.0) / 2.0, 0.0),
    )


def tetrahedron_positions_m(spacing_m: float) -> tuple[tuple[float, float, float], ...]:
    """Regular tetrahedron with the given edge length (4-atom registers)."""
    a = spacing_m
    return (
        (0.0, 0.0, 0.0),
        (a, 0.0, 0.0),
        (a / 2.0, a * np.sqrt(3.0) / 2.0, 0.0),
        (a / 2.0, a * np.sqrt(3.0) / 6.0, a * np.sqrt(2.0 / 3.0)),
    )
