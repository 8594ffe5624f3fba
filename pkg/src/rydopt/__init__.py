"""rydopt: Krotov pulse optimization and noise analysis for Rydberg gates."""

from .register import (
    AtomRegister,
    LevelScheme,
    PhysicalConstants,
    CS_CONSTANTS,
    THREE_LEVEL,
    FOUR_LEVEL,
    build_register,
    cs_rydberg_lifetime_s,
)
from .hamiltonian import (
    ControlDecomposition,
    DriftParams,
    TransitionSpec,
    NoiseView,
    apply_noise_perturbation,
    build_decomposition,
    build_fredkin_hamiltonian,
    build_two_photon_hamiltonian,
)
from .pulses import ControlField, TimeGrid, flattop_update_shape, gaussian_envelope
from .propagator import Trajectory, evolve_backward, evolve_forward, step
from .gates import (
    FidelityReport,
    GateTarget,
    TruthTable,
    closed_subspace_leakage,
    gate_fidelity,
    gate_target_by_name,
    rydberg_population_integral,
    target_ckz,
    target_cnot,
    target_fredkin,
    target_x,
    truth_table,
)
from .optimizer import (
    ControlProblem,
    ConvergenceTrace,
    KrotovDivergenceError,
    KrotovOptimizer,
    compute_jt,
    costate_boundary,
    gate_problem,
    krotov_gradient,
    krotov_update,
)
from .noise import (
    DopplerModel,
    FrequencyNoisePsd,
    InteractionJitterModel,
    MonteCarloResult,
    NoiseModel,
    NoiseRealization,
    RinModel,
    monte_carlo_fidelity,
    psd_eval,
    sample_doppler,
    synthesize_frequency_noise,
)

__version__ = "0.1.0"
