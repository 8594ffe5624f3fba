"""Run-configuration schema, loading and object builders.

Configs are YAML with explicit unit-suffixed keys.  Frequencies given in
ordinary units (``*_mhz``, ``*_ghz``, ``*_khz``) are converted to angular
rates internally; ``gamma_*_hz`` are population decay rates in 1/s (no 2 pi);
durations are in microseconds, temperatures in microkelvin, positions in
micrometers, and the trap jitter HWHM in nanometers.

Validation is strict: unknown keys are rejected and every violation is
reported with its dotted path into the document.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from .gates import GateTarget, gate_target_by_name
from .hamiltonian import (
    ControlDecomposition,
    DriftParams,
    TransitionSpec,
    build_decomposition,
    build_fredkin_hamiltonian,
    build_two_photon_hamiltonian,
)
from .noise import (
    DopplerModel,
    FrequencyNoisePsd,
    InteractionJitterModel,
    NoiseModel,
    RinModel,
)
from .optimizer import ControlProblem, KrotovOptimizer, gate_problem
from .pulses import ControlField, TimeGrid, flattop_update_shape, gaussian_envelope
from .register import (
    CS_CONSTANTS,
    FOUR_LEVEL,
    THREE_LEVEL,
    AtomRegister,
    build_register,
)

__all__ = ["ConfigError", "RunConfig", "load_config"]

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Schema violation or physically inconsistent configuration."""


_PULSE_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "peak_mhz": {"type": "number"},
        "center_fraction": {"type": "number", "minimum": 0.0, "maximum": 1.0},
        "sigma_fraction": {"type": "number", "exclusiveMinimum": 0.0},
        "shape": {"enum": ["gaussian", "flattop"]},
        "edge_fraction": {"type": "number", "minimum": 0.0, "exclusiveMaximum": 0.5},
        "phase_rad": {"type": "number"},
        # seed the im quadrature with fraction * envelope * sin(2 pi t / T);
        # a purely real guess is a symmetry point the optimizer can stall on
        "im_sine_fraction": {"type": "number"},
    },
    "required": ["peak_mhz"],
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["register", "grid", "gate"],
    "properties": {
        "register": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_atoms", "scheme", "roles"],
            "properties": {
                "n_atoms": {"type": "integer", "minimum": 1, "maximum": 4},
                "scheme": {"enum": ["three-level", "four-level"]},
                "roles": {
                    "type": "array",
                    "items": {"enum": ["control", "target"]},
                    "minItems": 1,
                    "maxItems": 4,
                },
                "hamiltonian": {
                    "enum": ["controlled-swap", "rydberg-global", "qubit-rotation", "two-photon"]
                },
                "v_mhz": {"type": "number", "exclusiveMinimum": 0.0},
                "c6_ghz_um6": {"type": "number", "exclusiveMinimum": 0.0},
                "positions_um": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "gamma_r_hz": {"type": "number", "minimum": 0.0},
                "gamma_p_hz": {"type": "number", "minimum": 0.0},
                "delta_ghz": {"type": "number"},
                "decay_convention": {"enum": ["half", "full"]},
                "optimize_phase": {"type": "boolean"},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["duration_us", "n_steps"],
            "properties": {
                "duration_us": {"type": "number", "exclusiveMinimum": 0.0},
                "n_steps": {"type": "integer", "minimum": 2},
            },
        },
        "gate": {
            "type": "object",
            "additionalProperties": False,
            "required": ["target"],
            "properties": {
                "target": {"enum": ["fredkin", "cz", "c1z", "c2z", "c3z", "x", "transfer"]},
                "phase_freedom": {"enum": ["none", "global", "per-atom-z"]},
                "transfer_from": {"type": "string"},
                "transfer_to": {"type": "string"},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lambda_a", "max_iters", "initial_pulses"],
            "properties": {
                "lambda_a": {
                    "anyOf": [
                        {"type": "number", "exclusiveMinimum": 0.0},
                        {
                            "type": "object",
                            "additionalProperties": {"type": "number", "exclusiveMinimum": 0.0},
                        },
                    ]
                },
                "max_iters": {"type": "integer", "minimum": 1},
                "stop_delta_jt": {"type": "number", "minimum": 0.0},
                "stop_jt": {"type": ["number", "null"], "minimum": 0.0},
                "functional": {"enum": ["square-modulus", "real-part"]},
                "update_shape_edge_fraction": {
                    "type": "number",
                    "minimum": 0.0,
                    "exclusiveMaximum": 0.5,
                },
                "lambda_backoff": {"type": "boolean"},
                "lambda_anneal": {
                    "type": "number",
                    "exclusiveMinimum": 0.0,
                    "maximum": 1.0,
                },
                "initial_pulses": {
                    "type": "object",
                    "additionalProperties": _PULSE_SPEC,
                    "minProperties": 1,
                },
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "n_runs": {"type": "integer", "minimum": 1},
                "rin": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "hwhm": {"type": "number", "minimum": 0.0},
                        "per_step": {"type": "boolean"},
                    },
                    "required": ["hwhm"],
                },
                "frequency_psd": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "h0_hz2_per_hz": {"type": "number", "minimum": 0.0},
                        "bumps": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["peak_hz2_per_hz", "sigma_khz", "center_khz"],
                                "properties": {
                                    "peak_hz2_per_hz": {"type": "number", "minimum": 0.0},
                                    "sigma_khz": {"type": "number", "exclusiveMinimum": 0.0},
                                    "center_khz": {"type": "number", "exclusiveMinimum": 0.0},
                                },
                            },
                        },
                        "f_max_khz": {"type": "number", "exclusiveMinimum": 0.0},
                        "delta_f_khz": {"type": "number", "exclusiveMinimum": 0.0},
                    },
                    "required": ["h0_hz2_per_hz"],
                },
                "doppler": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "temperature_uk": {"type": "number", "minimum": 0.0},
                        "resample": {"enum": ["per-run", "per-step"]},
                    },
                    "required": ["temperature_uk"],
                },
                "interaction": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "position_hwhm_nm": {"type": "number", "minimum": 0.0},
                    },
                    "required": ["position_hwhm_nm"],
                },
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


def _validate_document(doc) -> None:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            path = ".".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"  {path}: {err.message}")
        raise ConfigError("invalid configuration:\n" + "\n".join(lines))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration plus the builders everything else calls."""

    doc: dict
    sha256: str

    # -- builders -----------------------------------------------------------

    def register(self) -> AtomRegister:
        r = self.doc["register"]
        scheme = THREE_LEVEL if r["scheme"] == "three-level" else FOUR_LEVEL
        positions = r.get("positions_um")
        positions_m = (
            None
            if positions is None
            else [tuple(x * 1e-6 for x in p) for p in positions]
        )
        kwargs = {}
        if "c6_ghz_um6" in r:
            if "v_mhz" in r:
                raise ConfigError("register: give v_mhz or c6_ghz_um6, not both")
            # ordinary GHz um^6 -> rad/s m^6
            kwargs["c6_rad_m6"] = TWO_PI * r["c6_ghz_um6"] * 1e9 * 1e-36
        elif "v_mhz" in r:
            kwargs["v_rad"] = TWO_PI * r["v_mhz"] * 1e6
        try:
            return build_register(
                r["n_atoms"],
                scheme,
                r["roles"],
                positions_m=positions_m,
                constants=CS_CONSTANTS,
                **kwargs,
            )
        except ValueError as err:
            raise ConfigError(f"register: {err}") from err

    def drift(self) -> DriftParams:
        r = self.doc["register"]
        return DriftParams(
            gamma_r_rad=r.get("gamma_r_hz", 0.0),
            gamma_p_rad=r.get("gamma_p_hz", 0.0),
            delta_rad=TWO_PI * r.get("delta_ghz", 0.0) * 1e9,
            decay_convention=r.get("decay_convention", "half"),
        )

    def _hamiltonian_kind(self) -> str:
        r = self.doc["register"]
        if "hamiltonian" in r:
            return r["hamiltonian"]
        if r["scheme"] == "four-level":
            return "two-photon"
        gate_name = self.doc["gate"]["target"]
        if gate_name == "fredkin":
            return "controlled-swap"
        if gate_name in ("x", "transfer"):
            return "qubit-rotation"
        return "rydberg-global"

    def decomposition(self, register: AtomRegister | None = None) -> ControlDecomposition:
        register = register or self.register()
        drift = self.drift()
        optimize_phase = self.doc["register"].get("optimize_phase", False)
        kind = self._hamiltonian_kind()
        try:
            if kind == "controlled-swap":
                return build_fredkin_hamiltonian(register, drift, optimize_phase=optimize_phase)
            if kind == "two-photon":
                return build_two_photon_hamiltonian(register, drift, optimize_phase=optimize_phase)
            scheme = register.scheme
            all_atoms = tuple(range(register.n_atoms))
            if kind == "rydberg-global":
                transitions = (
                    TransitionSpec(
                        "Omega_r", all_atoms, from_level="1", to_level=scheme.rydberg_level
                    ),
                )
            else:  # qubit-rotation
                transitions = (
                    TransitionSpec("Omega_p", all_atoms, from_level="1", to_level="0"),
                )
            return build_decomposition(
                register, transitions, drift, optimize_phase=optimize_phase
            )
        except ValueError as err:
            raise ConfigError(f"register/gate: {err}") from err

    def grid(self) -> TimeGrid:
        g = self.doc["grid"]
        return TimeGrid(duration_s=g["duration_us"] * 1e-6, n_steps=g["n_steps"])

    def gate(self) -> GateTarget | None:
        g = self.doc["gate"]
        if g["target"] == "transfer":
            return None
        gate = gate_target_by_name(g["target"])
        if "phase_freedom" in g:
            gate = GateTarget(gate.name, gate.n_qubits, gate.matrix, g["phase_freedom"])
        return gate

    def initial_fields(self, decomp: ControlDecomposition, grid: TimeGrid):
        opt = self.doc.get("optimizer")
        if opt is None:
            raise ConfigError("this command needs an 'optimizer' block")
        specs = opt["initial_pulses"]
        unknown = set(specs) - set(decomp.channel_names())
        if unknown:
            raise ConfigError(
                f"optimizer.initial_pulses: unknown channels {sorted(unknown)}; "
                f"decomposition has {decomp.channel_names()}"
            )
        fields = []
        for op in decomp.controls:
            spec = specs.get(op.channel)
            if spec is None:
                raise ConfigError(f"optimizer.initial_pulses missing channel {op.channel!r}")
            peak = TWO_PI * spec["peak_mhz"] * 1e6
            if spec.get("shape", "gaussian") == "flattop":
                amp = peak * flattop_update_shape(grid, spec.get("edge_fraction", 0.1))
            else:
                amp = gaussian_envelope(
                    grid,
                    peak,
                    center_fraction=spec.get("center_fraction", 0.5),
                    sigma_fraction=spec.get("sigma_fraction", 1.0 / 6.0),
                )
            phase = spec.get("phase_rad", 0.0)
            if op.quadrature == "re":
                values = amp * math.cos(phase)
            else:
                values = amp * math.sin(phase)
                frac = spec.get("im_sine_fraction", 0.0)
                if frac:
                    values = values + frac * amp * np.sin(
                        2.0 * np.pi * grid.field_times / grid.duration_s
                    )
            fields.append(ControlField(op.channel, op.quadrature, values))
        return tuple(fields)

    def problem(self, decomp=None, grid=None) -> ControlProblem:
        decomp = decomp or self.decomposition()
        grid = grid or self.grid()
        fields = self.initial_fields(decomp, grid)
        gate = self.gate()
        if gate is not None:
            return gate_problem(decomp, grid, gate, fields)
        g = self.doc["gate"]
        try:
            frm, to = g["transfer_from"], g["transfer_to"]
        except KeyError as err:
            raise ConfigError("transfer problems need transfer_from and transfer_to") from err
        register = decomp.register
        if len(frm) != register.n_atoms or len(to) != register.n_atoms:
            raise ConfigError("transfer states need one level label per atom")
        return ControlProblem(
            decomp=decomp,
            grid=grid,
            initial_states=register.basis_state(tuple(frm))[:, None],
            targets=register.basis_state(tuple(to))[:, None],
            initial_fields=fields,
        )

    def optimizer(self) -> KrotovOptimizer:
        opt = self.doc.get("optimizer")
        if opt is None:
            raise ConfigError("this command needs an 'optimizer' block")
        return KrotovOptimizer(
            lambda_a=opt["lambda_a"],
            max_iters=opt["max_iters"],
            stop_delta_jt=opt.get("stop_delta_jt", 0.0),
            stop_jt=opt.get("stop_jt"),
            functional=opt.get("functional", "square-modulus"),
            shape_edge_fraction=opt.get("update_shape_edge_fraction", 0.05),
            lambda_backoff=opt.get("lambda_backoff", True),
            lambda_anneal=opt.get("lambda_anneal", 1.0),
        )

    def noise_model(self) -> NoiseModel:
        n = self.doc.get("noise", {})
        rin = None
        if "rin" in n:
            rin = RinModel(hwhm=n["rin"]["hwhm"], per_step=n["rin"].get("per_step", True))
        psd = None
        f_max = None
        delta_f = 1e3
        if "frequency_psd" in n:
            p = n["frequency_psd"]
            psd = FrequencyNoisePsd.from_peak_heights(
                p["h0_hz2_per_hz"],
                [
                    (b["peak_hz2_per_hz"], b["sigma_khz"] * 1e3, b["center_khz"] * 1e3)
                    for b in p.get("bumps", [])
                ],
            )
            if "f_max_khz" in p:
                f_max = p["f_max_khz"] * 1e3
            delta_f = p.get("delta_f_khz", 1.0) * 1e3
        doppler = None
        if "doppler" in n:
            doppler = DopplerModel(
                temperature_k=n["doppler"]["temperature_uk"] * 1e-6,
                resample=n["doppler"].get("resample", "per-run"),
            )
        interaction = None
        if "interaction" in n:
            interaction = InteractionJitterModel(
                position_hwhm_m=n["interaction"]["position_hwhm_nm"] * 1e-9
            )
        return NoiseModel(
            rin=rin,
            frequency_psd=psd,
            doppler=doppler,
            interaction=interaction,
            f_max_hz=f_max,
            delta_f_hz=delta_f,
        )

    @property
    def seed(self) -> int:
        return self.doc.get("noise", {}).get("seed", 0)

    @property
    def n_runs(self) -> int:
        return self.doc.get("noise", {}).get("n_runs", 50)


def load_config(path) -> RunConfig:
    """Load, schema-validate and hash a YAML run configuration."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    _validate_document(doc)
    cfg = RunConfig(doc=doc, sha256=hashlib.sha256(raw).hexdigest())
    # fail fast on cross-field problems the JSON schema cannot express
    cfg.register()
    np_roles = np.asarray(doc["register"]["roles"])
    if len(np_roles) != doc["register"]["n_atoms"]:
        raise ConfigError("register.roles length must equal n_atoms")
    return cfg
