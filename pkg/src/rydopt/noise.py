"""Stochastic error channels and Monte-Carlo fidelity estimation.

Four channels are modeled:

* relative intensity noise -- Gaussian multiplicative factor on the Rabi
  frequencies, by default redrawn at every time step;
* laser frequency noise -- a white floor plus Gaussian servo bumps in the
  frequency PSD, synthesized as a random-phase sine series and applied as a
  common-mode detuning of the Rydberg level (all atoms see the same laser);
* Doppler dephasing -- per-atom Gaussian detunings with sigma = k_eff * v_rms,
  by default quasi-static (one draw per run, the cold-atom ballistic picture);
* interaction jitter -- per-run Gaussian atom-position scatter rescaling every
  pairwise V as (R0/R')^6.

Every random number is drawn from a generator derived from (seed, run index,
channel index), so a realization is fully reproducible, channels can be
toggled without shifting each other's draws, and parameter sweeps reuse
common random numbers across sweep points.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .gates import GateTarget, gate_fidelity, target_states
from .hamiltonian import ControlDecomposition, NoiseView, apply_noise_perturbation
from .propagator import _forward_block
from .pulses import TimeGrid, fields_to_matrix
from .register import CS_CONSTANTS, AtomRegister

__all__ = [
    "RinModel",
    "FrequencyNoisePsd",
    "DopplerModel",
    "InteractionJitterModel",
    "NoiseModel",
    "NoiseRealization",
    "MonteCarloResult",
    "psd_eval",
    "synthesize_frequency_noise",
    "sample_doppler",
    "sample_interaction_scales",
    "realize_noise",
    "monte_carlo_fidelity",
    "noise_sweep",
]

_GAUSS_HWHM_TO_SIGMA = 1.0 / math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class RinModel:
    """Relative intensity noise: Omega -> (1 + x) Omega with x Gaussian of the
    given half-width at half-maximum."""

    hwhm: float
    per_step: bool = True

    def __post_init__(self):
        if self.hwhm < 0:
            raise ValueError("RIN HWHM must be >= 0")

    @property
    def sigma(self) -> float:
        return self.hwhm * _GAUSS_HWHM_TO_SIGMA


@dataclass(frozen=True)
class FrequencyNoisePsd:
    """One-sided frequency-noise PSD: white floor plus Gaussian servo bumps.

    S(f) = h0 + sum_g s_g f_g^2 / (sqrt(8 pi) sigma_g)
                 * (exp(-(f-f_g)^2 / 2 sigma_g^2) + exp(-(f+f_g)^2 / 2 sigma_g^2))

    ``bumps`` entries are (s_g, sigma_g, f_g).  Measured spectra usually quote
    the bump's *peak height* in Hz^2/Hz instead of s_g; use
    :meth:`from_peak_heights` for those.
    """

    h0_hz2_per_hz: float = 0.0
    bumps: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.h0_hz2_per_hz < 0:
            raise ValueError("white-noise level must be >= 0")
        for s_g, sigma_g, f_g in self.bumps:
            if s_g < 0 or sigma_g <= 0 or f_g <= 0:
                raise ValueError("bump parameters must be positive (s_g >= 0)")

    @classmethod
    def from_peak_heights(cls, h0_hz2_per_hz: float, peaks) -> "FrequencyNoisePsd":
        """Build from bump peak heights: entries (peak_hz2_per_hz, sigma_hz, f_hz).

        Inverts the prefactor so that S(f_g) ~= peak (exactly, up to the
        negligible mirror-bump tail at +f_g).
        """
        bumps = tuple(
            (peak * math.sqrt(8.0 * math.pi) * sigma_g / f_g**2, sigma_g, f_g)
            for peak, sigma_g, f_g in peaks
        )
        return cls(h0_hz2_per_hz=h0_hz2_per_hz, bumps=bumps)

    @classmethod
    def tisa_1040(cls) -> "FrequencyNoisePsd":
        """Measured noise of a cavity-locked 1040 nm Ti:Sa laser: 13 Hz^2/Hz
        white floor plus servo bumps peaking at 25 Hz^2/Hz (sigma 18 kHz at
        130 kHz) and 2.0e3 Hz^2/Hz (sigma 1.5 kHz at 234 kHz)."""
        return cls.from_peak_heights(13.0, ((25.0, 18e3, 130e3), (2.0e3, 1.5e3, 234e3)))

    def default_f_max(self) -> float:
        if not self.bumps:
            return 2e6
        return max(2e6, max(f_g + 5.0 * sigma_g for _, sigma_g, f_g in self.bumps))


def psd_eval(psd: FrequencyNoisePsd, f) -> np.ndarray:
    """Evaluate the PSD (Hz^2/Hz) at frequency f (Hz); even in f."""
    f = np.asarray(f, dtype=float)
    s = np.full_like(f, psd.h0_hz2_per_hz)
    for s_g, sigma_g, f_g in psd.bumps:
        pref = s_g * f_g**2 / (math.sqrt(8.0 * math.pi) * sigma_g)
        s = s + pref * (
            np.exp(-((f - f_g) ** 2) / (2.0 * sigma_g**2))
            + np.exp(-((f + f_g) ** 2) / (2.0 * sigma_g**2))
        )
    return s


def synthesize_frequency_noise(
    psd: FrequencyNoisePsd,
    grid: TimeGrid,
    f_max_hz: float,
    delta_f_hz: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Random-phase sine series delta_nu(t_k) (Hz) on the field grid.

    delta_nu(t) = sum_j dnu_j sin(2 pi f_j t + phi_j), f_j = j delta_f,
    |dnu_j| = 2 sqrt(S(f_j) delta_f), phi_j uniform in [0, 2 pi).  The random
    phase makes the overall sign of dnu_j irrelevant, so the magnitude is
    used.  Ensemble variance at any instant is 2 * integral of S over the
    synthesized band.
    """
    if delta_f_hz <= 0:
        raise ValueError("delta_f must be > 0")
    if f_max_hz < delta_f_hz:
        raise ValueError("f_max must be >= delta_f")
    if f_max_hz > 0.5 / grid.dt:
        raise ValueError(
            f"f_max = {f_max_hz:.3g} Hz violates the grid Nyquist limit "
            f"{0.5 / grid.dt:.3g} Hz; refine the time grid"
        )
    n_lines = int(f_max_hz / delta_f_hz)
    f_j = delta_f_hz * np.arange(1, n_lines + 1)
    amps = 2.0 * np.sqrt(psd_eval(psd, f_j) * delta_f_hz)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_lines)
    t = grid.field_times
    return (amps * np.sin(2.0 * np.pi * np.outer(t, f_j) + phases)).sum(axis=1)


@dataclass(frozen=True)
class DopplerModel:
    """Thermal Doppler detunings: Normal(0, (k_eff v_rms)^2) per atom."""

    temperature_k: float
    k_eff_rad_per_m: float = CS_CONSTANTS.k_eff
    resample: str = "per-run"  # or "per-step"

    def __post_init__(self):
        if self.temperature_k < 0:
            raise ValueError("temperature must be >= 0")
        if self.resample not in ("per-run", "per-step"):
            raise ValueError("resample must be 'per-run' or 'per-step'")

    @property
    def sigma_delta_rad(self) -> float:
        return self.k_eff_rad_per_m * CS_CONSTANTS.v_rms(self.temperature_k)


def sample_doppler(
    model: DopplerModel, n_atoms: int, rng: np.random.Generator, n_steps: int | None = None
) -> np.ndarray:
    """Per-atom detunings (rad/s); shape (n_atoms,) or (n_steps, n_atoms)."""
    if model.resample == "per-step":
        if n_steps is None:
            raise ValueError("per-step resampling needs n_steps")
        shape = (n_steps, n_atoms)
    else:
        shape = (n_atoms,)
    return model.sigma_delta_rad * rng.standard_normal(shape)


@dataclass(frozen=True)
class InteractionJitterModel:
    """Per-run Gaussian position scatter; V rescales as (R0/R')^6."""

    position_hwhm_m: float

    def __post_init__(self):
        if self.position_hwhm_m < 0:
            raise ValueError("position HWHM must be >= 0")

    @property
    def sigma_m(self) -> float:
        return self.position_hwhm_m * _GAUSS_HWHM_TO_SIGMA


def sample_interaction_scales(
    model: InteractionJitterModel, register: AtomRegister, rng: np.random.Generator
) -> np.ndarray:
    """One multiplicative V factor per pair term, in the decomposition's
    sorted-pair order."""
    if register.positions_m is None:
        raise ValueError("interaction jitter needs atom positions in the register")
    pos = np.asarray(register.positions_m, dtype=float)
    jittered = pos + model.sigma_m * rng.standard_normal(pos.shape)
    pairs = sorted(register.pair_interactions_rad)
    scales = np.empty(len(pairs))
    for idx, (i, j) in enumerate(pairs):
        r0 = np.linalg.norm(pos[i] - pos[j])
        r1 = np.linalg.norm(jittered[i] - jittered[j])
        scales[idx] = (r0 / r1) ** 6
    return scales


@dataclass(frozen=True)
class NoiseModel:
    """Composite noise description; channels set to None are off."""

    rin: RinModel | None = None
    frequency_psd: FrequencyNoisePsd | None = None
    doppler: DopplerModel | None = None
    interaction: InteractionJitterModel | None = None
    f_max_hz: float | None = None
    delta_f_hz: float = 1e3

    def any_active(self) -> bool:
        return any(
            x is not None
            for x in (self.rin, self.frequency_psd, self.doppler, self.interaction)
        )


@dataclass(frozen=True)
class NoiseRealization:
    """One draw of every active channel; identical seed => identical draw."""

    seed: int
    run_index: int
    rin_factors: np.ndarray | None = None
    delta_nu_hz: np.ndarray | None = None
    doppler_rad: np.ndarray | None = None
    v_scales: np.ndarray | float = 1.0

    def view(self, decomp: ControlDecomposition, grid: TimeGrid) -> NoiseView:
        return apply_noise_perturbation(
            decomp,
            grid.n_steps,
            rin_factors=self.rin_factors,
            common_detuning_rad=(
                None if self.delta_nu_hz is None else 2.0 * np.pi * self.delta_nu_hz
            ),
            doppler_rad=self.doppler_rad,
            v_scale=self.v_scales,
        )


def _channel_rng(seed: int, run_index: int, channel: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(run_index, channel))
    )


def realize_noise(
    model: NoiseModel,
    register: AtomRegister,
    grid: TimeGrid,
    seed: int,
    run_index: int = 0,
) -> NoiseRealization:
    """Draw one realization of every active channel."""
    rin_factors = None
    if model.rin is not None and model.rin.hwhm > 0:
        rng = _channel_rng(seed, run_index, 0)
        if model.rin.per_step:
            rin_factors = model.rin.sigma * rng.standard_normal(grid.n_steps)
        else:
            rin_factors = np.full(grid.n_steps, model.rin.sigma * rng.standard_normal())
    delta_nu = None
    if model.frequency_psd is not None:
        rng = _channel_rng(seed, run_index, 1)
        f_max = model.f_max_hz or model.frequency_psd.default_f_max()
        delta_nu = synthesize_frequency_noise(
            model.frequency_psd, grid, f_max, model.delta_f_hz, rng
        )
    doppler = None
    if model.doppler is not None and model.doppler.temperature_k > 0:
        rng = _channel_rng(seed, run_index, 2)
        doppler = sample_doppler(model.doppler, register.n_atoms, rng, grid.n_steps)
    v_scales: np.ndarray | float = 1.0
    if model.interaction is not None and model.interaction.position_hwhm_m > 0:
        rng = _channel_rng(seed, run_index, 3)
        v_scales = sample_interaction_scales(model.interaction, register, rng)
    return NoiseRealization(
        seed=seed,
        run_index=run_index,
        rin_factors=rin_factors,
        delta_nu_hz=delta_nu,
        doppler_rad=doppler,
        v_scales=v_scales,
    )


@dataclass(frozen=True)
class MonteCarloResult:
    """Aggregate of one Monte-Carlo fidelity estimate."""

    mean_fidelity: float
    mean_infidelity: float
    std_error: float
    fidelities: np.ndarray
    n_runs: int
    seed: int


def _run_fidelity(decomp, field_matrix, grid, gate, initials, model, seed, run_index):
    realization = realize_noise(model, decomp.register, grid, seed, run_index)
    noise_view = realization.view(decomp, grid)
    finals, _, _ = _forward_block(
        decomp, field_matrix, grid, initials, noise_view, store_states=False
    )
    return gate_fidelity(finals, gate, decomp.register).fidelity


def monte_carlo_fidelity(
    decomp: ControlDecomposition,
    fields,
    grid: TimeGrid,
    gate: GateTarget,
    noise: NoiseModel,
    n_runs: int = 50,
    seed: int = 0,
    n_threads: int = 1,
) -> MonteCarloResult:
    """Average gate fidelity over ``n_runs`` independent noise realizations.

    Aggregation uses compensated summation in run-index order, so the result
    is identical whether runs execute sequentially or on a thread pool.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    field_matrix = fields_to_matrix(fields, decomp, grid)
    initials, _ = target_states(decomp.register, gate)

    fids = np.empty(n_runs)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = {
                pool.submit(
                    _run_fidelity, decomp, field_matrix, grid, gate, initials, noise, seed, i
                ): i
                for i in range(n_runs)
            }
            for fut, i in futures.items():
                fids[i] = fut.result()
    else:
        for i in range(n_runs):
            fids[i] = _run_fidelity(
                decomp, field_matrix, grid, gate, initials, noise, seed, i
            )

    mean_f = math.fsum(fids) / n_runs
    if n_runs > 1:
        var = math.fsum((f - mean_f) ** 2 for f in fids) / (n_runs - 1)
        sem = math.sqrt(var / n_runs)
    else:
        sem = 0.0
    return MonteCarloResult(
        mean_fidelity=mean_f,
        mean_infidelity=1.0 - mean_f,
        std_error=sem,
        fidelities=fids,
        n_runs=n_runs,
        seed=seed,
    )


SWEEP_CHANNELS = ("rin", "psd-white", "doppler", "interaction")


def _sweep_model(base: NoiseModel, channel: str, value: float) -> NoiseModel:
    """Noise model for one sweep point: only the swept channel is active.

    Values are in the channel's natural unit: RIN HWHM (fraction), white PSD
    level (Hz^2/Hz), atomic temperature (uK), position HWHM (nm).
    """
    if channel == "rin":
        per_step = base.rin.per_step if base.rin is not None else True
        return NoiseModel(rin=RinModel(hwhm=value, per_step=per_step))
    if channel == "psd-white":
        bumps = base.frequency_psd.bumps if base.frequency_psd is not None else ()
        return NoiseModel(
            frequency_psd=FrequencyNoisePsd(h0_hz2_per_hz=value, bumps=bumps),
            f_max_hz=base.f_max_hz,
            delta_f_hz=base.delta_f_hz,
        )
    if channel == "doppler":
        proto = base.doppler or DopplerModel(temperature_k=0.0)
        return NoiseModel(doppler=replace(proto, temperature_k=value * 1e-6))
    if channel == "interaction":
        return NoiseModel(interaction=InteractionJitterModel(position_hwhm_m=value * 1e-9))
    raise ValueError(f"unknown sweep channel {channel!r}; choose from {SWEEP_CHANNELS}")


def noise_sweep(
    decomp: ControlDecomposition,
    fields,
    grid: TimeGrid,
    gate: GateTarget,
    base_noise: NoiseModel,
    channel: str,
    values,
    n_runs: int = 50,
    seed: int = 0,
    n_threads: int = 1,
) -> list[tuple[float, MonteCarloResult]]:
    """Monte-Carlo infidelity versus one noise parameter.

    Run seeds depend only on (seed, run index), not on the sweep value, so
    every point sees common random numbers.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one parameter value")
    out = []
    for value in values:
        model = _sweep_model(base_noise, channel, float(value))
        out.append(
            (
                float(value),
                monte_carlo_fidelity(
                    decomp, fields, grid, gate, model, n_runs, seed, n_threads
                ),
            )
        )
    return out
