"""Gate targets, truth tables, fidelity with phase freedom, and Rydberg-time
metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .propagator import Trajectory
from .register import AtomRegister

__all__ = [
    "GateTarget",
    "TruthTable",
    "FidelityReport",
    "target_fredkin",
    "target_ckz",
    "target_cnot",
    "target_x",
    "gate_target_by_name",
    "target_states",
    "ones_counts",
    "truth_table",
    "gate_fidelity",
    "fit_phase_per_atom_z",
    "rydberg_population_integral",
    "closed_subspace_leakage",
]


@dataclass(frozen=True)
class GateTarget:
    """Target unitary on the computational subspace.

    ``phase_freedom`` names the equivalence class the fidelity is maximized
    over: "none", "global" (overall phase), or "per-atom-z" (target equivalent
    up to diag(e^{i m phi1}) with m = number of qubits in |1>).
    """

    name: str
    n_qubits: int
    matrix: np.ndarray
    phase_freedom: str = "none"

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        n = 2**self.n_qubits
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not match {self.n_qubits} qubits")
        if not np.allclose(mat.conj().T @ mat, np.eye(n), atol=1e-12):
            raise ValueError("target matrix is not unitary to 1e-12")
        if self.phase_freedom not in ("none", "global", "per-atom-z"):
            raise ValueError(f"unknown phase freedom {self.phase_freedom!r}")
        object.__setattr__(self, "matrix", mat)


def target_fredkin() -> GateTarget:
    """Controlled swap: qubit 0 controls the exchange of qubits 1 and 2."""
    mat = np.zeros((8, 8), dtype=complex)
    for i in range(8):
        c, t1, t2 = (i >> 2) & 1, (i >> 1) & 1, i & 1
        if c:
            t1, t2 = t2, t1
        mat[(c << 2) | (t1 << 1) | t2, i] = 1.0
    return GateTarget("fredkin", 3, mat, phase_freedom="global")


def target_ckz(k: int) -> GateTarget:
    """C_k-Z on k+1 qubits: -1 on the all-ones state, identity elsewhere."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    n = k + 1
    diag = np.ones(2**n, dtype=complex)
    diag[-1] = -1.0
    return GateTarget(f"c{k}z", n, np.diag(diag), phase_freedom="per-atom-z")


def target_cnot() -> GateTarget:
    mat = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]]
    return GateTarget("cnot", 2, mat, phase_freedom="global")


def target_x() -> GateTarget:
    return GateTarget("x", 1, np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex), "global")


def gate_target_by_name(name: str) -> GateTarget:
    builders = {
        "fredkin": target_fredkin,
        "cz": lambda: target_ckz(1),
        "c1z": lambda: target_ckz(1),
        "c2z": lambda: target_ckz(2),
        "c3z": lambda: target_ckz(3),
        "cnot": target_cnot,
        "x": target_x,
    }
    try:
        return builders[name]()
    except KeyError:
        raise ValueError(f"unknown gate target {name!r}") from None


def ones_counts(n_qubits: int) -> np.ndarray:
    """Number of |1> qubits per computational input, bitstring order."""
    return np.array([bin(i).count("1") for i in range(2**n_qubits)])


def target_states(register: AtomRegister, target: GateTarget) -> tuple[np.ndarray, np.ndarray]:
    """(initial, target) state blocks of shape (dim, 2^n) for all inputs."""
    if target.n_qubits != register.n_atoms:
        raise ValueError(
            f"gate acts on {target.n_qubits} qubits but register has {register.n_atoms} atoms"
        )
    comp = register.computational_indices()
    n_in = len(comp)
    initials = np.zeros((register.dim, n_in), dtype=complex)
    targets = np.zeros((register.dim, n_in), dtype=complex)
    initials[comp, np.arange(n_in)] = 1.0
    targets[comp[:, None], np.arange(n_in)[None, :]] = target.matrix
    return initials, targets


@dataclass(frozen=True)
class TruthTable:
    """Transition probabilities P(f <- i) = |<f|U|i>|^2 on the computational
    basis; the column deficit (1 - column sum) is leakage plus decay."""

    probabilities: np.ndarray
    labels: tuple[str, ...]

    @property
    def column_deficits(self) -> np.ndarray:
        return 1.0 - self.probabilities.sum(axis=0)


def _final_states_block(final_states, register: AtomRegister) -> np.ndarray:
    block = np.asarray(final_states, dtype=complex)
    if block.ndim != 2 or block.shape[0] != register.dim:
        raise ValueError(
            f"expected final states of shape (dim={register.dim}, 2^n), got {block.shape}"
        )
    n_in = 2**register.n_atoms
    if block.shape[1] != n_in:
        raise ValueError(f"need all {n_in} computational inputs, got {block.shape[1]}")
    return block


def truth_table(final_states, register: AtomRegister) -> TruthTable:
    """Truth table from the evolved states of all computational inputs
    (columns ordered like ``register.computational_indices()``)."""
    block = _final_states_block(final_states, register)
    comp = register.computational_indices()
    probs = np.abs(block[comp, :]) ** 2
    labels = tuple(
        "".join(register.basis_labels(i)[a] for a in range(register.n_atoms)) for i in comp
    )
    return TruthTable(probabilities=probs, labels=labels)


def _golden_section_max(f, a: float, b: float, tol: float) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    return (a + b) / 2.0


def fit_phase_per_atom_z(taus: np.ndarray, m: np.ndarray, tol: float = 1e-6) -> float:
    """phi maximizing |sum_j exp(-i m_j phi) tau_j|; coarse scan plus
    golden-section refinement to ``tol`` radians."""

    def score(phi):
        return np.abs(np.sum(np.exp(-1j * m * phi) * taus))

    grid = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
    values = np.abs(np.exp(-1j * np.outer(grid, m)) @ taus)
    k = int(np.argmax(values))
    width = grid[1] - grid[0]
    return _golden_section_max(score, grid[k] - width, grid[k] + width, tol) % (2.0 * np.pi)


@dataclass(frozen=True)
class FidelityReport:
    """Gate fidelity and its ingredients for one set of evolved states.

    ``fidelity`` is the coherent average-overlap value (the headline number);
    ``fidelity_mean_probability`` averages per-input transfer probabilities
    instead and is reported alongside.
    """

    fidelity: float
    fidelity_mean_probability: float
    fitted_phase_rad: float | None
    overlaps: np.ndarray
    input_phases_rad: np.ndarray
    leakage_per_input: np.ndarray
    rydberg_time_integral_s: float | None = None
    labels: tuple[str, ...] = field(default=())

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


def gate_fidelity(
    final_states,
    target: GateTarget,
    register: AtomRegister,
    *,
    rydberg_time_integral_s: float | None = None,
) -> FidelityReport:
    """Coherent average-overlap gate fidelity, maximized over the target's
    phase freedom.

    F = max_phi |(1/N) sum_j e^{-i theta_j(phi)} <target_j|psi_j(T)>|^2.
    """
    block = _final_states_block(final_states, register)
    _, tgt = target_states(register, target)
    taus = np.sum(tgt.conj() * block, axis=0)
    n = taus.size

    fitted: float | None = None
    taus_eff = taus
    if target.phase_freedom == "per-atom-z":
        m = ones_counts(target.n_qubits)
        fitted = fit_phase_per_atom_z(taus, m)
        taus_eff = np.exp(-1j * m * fitted) * taus
    elif target.phase_freedom == "global":
        fitted = float(np.angle(np.sum(taus)))

    fidelity = float(np.abs(np.mean(taus_eff)) ** 2)
    fid_prob = float(np.mean(np.abs(taus) ** 2))

    comp = register.computational_indices()
    leakage = 1.0 - np.sum(np.abs(block[comp, :]) ** 2, axis=0)
    labels = tuple(
        "".join(register.basis_labels(i)[a] for a in range(register.n_atoms)) for i in comp
    )
    return FidelityReport(
        fidelity=fidelity,
        fidelity_mean_probability=fid_prob,
        fitted_phase_rad=fitted,
        overlaps=taus,
        input_phases_rad=np.angle(taus),
        leakage_per_input=leakage,
        rydberg_time_integral_s=rydberg_time_integral_s,
        labels=labels,
    )


def rydberg_population_integral(trajectories) -> float:
    """Time integral of the input-averaged total Rydberg population (s)."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    grid = trajectories[0].grid
    for tr in trajectories[1:]:
        if tr.grid != grid:
            raise ValueError("trajectories must share one time grid")
    pr = np.mean([tr.rydberg_population() for tr in trajectories], axis=0)
    return float(np.trapezoid(pr, grid.state_times))


def closed_subspace_leakage(trajectory: Trajectory, control_state: int) -> np.ndarray:
    """Population outside the blockade-closed subspace fixed by the control
    qubit's initial value.

    The subspace keeps the control atom consistent with its initial value
    (|0> stays |0>; |1> may cycle through |r>) and admits at most one Rydberg
    excitation in total.  Under an intact blockade the returned series stays
    near zero; switching the interaction off makes double excitations leak
    out and register here.
    """
    register = trajectory.decomp.register
    if len(register.control_atoms) != 1:
        raise ValueError("closed-subspace leakage is defined for a single control atom")
    control = register.control_atoms[0]
    if control_state not in (0, 1):
        raise ValueError("control_state must be 0 or 1")

    lv0, lv1 = register.scheme.computational_levels
    occ0 = register.level_occupancy(lv0)[control]
    occ1 = register.level_occupancy(lv1)[control]
    occ_r_ctrl = register.level_occupancy(register.scheme.rydberg_level)[control]
    r_count = register.level_occupancy(register.scheme.rydberg_level).sum(axis=0)

    p0 = trajectory.basis_populations()[0]
    p_ctrl0 = float(p0 @ occ0)
    p_ctrl1 = float(p0 @ (occ1 + occ_r_ctrl))
    expected = 1.0 if control_state == 0 else 0.0
    if abs(p_ctrl0 - expected) > 1e-12 or abs(p_ctrl1 - (1.0 - expected)) > 1e-12:
        raise ValueError(
            "initial state has no definite control-qubit value; leakage metric not applicable"
        )

    if control_state == 0:
        inside = (occ0 > 0) & (r_count <= 1)
    else:
        inside = ((occ1 + occ_r_ctrl) > 0) & (r_count <= 1)
    return trajectory.basis_populations()[:, ~inside].sum(axis=1)
