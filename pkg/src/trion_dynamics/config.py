"""Run configuration: strict JSON parsing with physically validated defaults.

Every default physical value traces to the published simulation parameter
set; all keys use publication units (GHz, ps, fs, ns^-1, ueV, T).  Unknown
keys are rejected with the offending path named, so a typo never silently
falls back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .system import MagnetoModel, SystemParams

EXPERIMENTS = ("rabi", "ramsey", "coherence", "map", "zeeman")


class ConfigError(ValueError):
    pass


@dataclass
class SequenceConfig:
    """Pulse-sequence template; area is the primary amplitude axis."""

    area_pi: float = 0.5
    peak_ghz: Optional[float] = None  # overrides area_pi when set
    fwhm_ps: float = 23.0
    coarse_delay_ps: float = 80.0
    fine_delay_fs: float = 0.0
    detuning_ghz: float = 0.0


@dataclass
class SolverConfig:
    tol: float = 1e-9
    sample_ps: float = 0.1


@dataclass
class GridConfig:
    # rabi
    area_start_pi: float = 0.0
    area_stop_pi: float = 4.25
    area_points: int = 81
    # ramsey / coherence / map fine axis
    fine_start_fs: float = 0.0
    fine_stop_fs: float = 11.0
    fine_points: int = 111
    # coherence coarse axis
    coarse_start_ps: float = 80.0
    coarse_stop_ps: float = 180.0
    coarse_points: int = 31
    # map axes
    map_area_stop_pi: float = 2.5
    map_points: int = 61
    # zeeman
    b_min: float = 0.0
    b_max: float = 5.0
    b_points: int = 51


@dataclass
class RunConfig:
    experiment: str
    system: SystemParams = field(default_factory=SystemParams)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    magneto: MagnetoModel = field(default_factory=MagnetoModel)
    grids: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = ""
    seed: int = 12345


_SECTION_TYPES = {
    "system": SystemParams,
    "sequence": SequenceConfig,
    "magneto": MagnetoModel,
    "grids": GridConfig,
    "solver": SolverConfig,
}

_RANGE_RULES = {
    "sequence.area_pi": lambda v: v >= 0,
    "sequence.peak_ghz": lambda v: v is None or v >= 0,
    "sequence.fwhm_ps": lambda v: v > 0,
    "solver.tol": lambda v: 1e-12 <= v <= 1e-4,
    "solver.sample_ps": lambda v: v > 0,
    "grids.area_points": lambda v: v >= 2,
    "grids.fine_points": lambda v: v >= 2,
    "grids.coarse_points": lambda v: v >= 2,
    "grids.map_points": lambda v: v >= 2,
    "grids.b_points": lambda v: v >= 2,
    "grids.b_min": lambda v: v >= 0,
    "grids.b_max": lambda v: v >= 0,
}


def _build_section(name: str, cls, data: dict):
    defaults = cls()
    known = set(asdict(defaults))
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {name}.{key}")
        rule = _RANGE_RULES.get(f"{name}.{key}")
        if rule is not None and not rule(value):
            raise ConfigError(f"out-of-range value for {name}.{key}: {value!r}")
        kwargs[key] = value
    try:
        return type(defaults)(**{**asdict(defaults), **kwargs})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} section: {exc}") from exc


def parse_config(text: str, default_experiment: Optional[str] = None) -> RunConfig:
    """Parse a JSON config document into a validated RunConfig.

    A manifest.json written by a previous run is accepted as well: its
    embedded "config" object is unwrapped, which makes any run exactly
    reproducible from its manifest alone.
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and "experiment" in data.get("config", {}):
        data = data["config"]  # manifest round-trip

    known_top = {
        "experiment",
        "system",
        "sequence",
        "magneto",
        "grids",
        "solver",
        "output_dir",
        "seed",
    }
    for key in data:
        if key not in known_top:
            raise ConfigError(f"unknown config key: {key}")

    experiment = data.get("experiment", default_experiment)
    if experiment is None:
        raise ConfigError("missing required field: experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}"
        )

    sections = {}
    for name, cls in _SECTION_TYPES.items():
        payload = data.get(name, {})
        if not isinstance(payload, dict):
            raise ConfigError(f"section {name} must be an object")
        sections[name] = _build_section(name, cls, payload)

    seed = data.get("seed", 12345)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")

    return RunConfig(
        experiment=experiment,
        system=sections["system"],
        sequence=sections["sequence"],
        magneto=sections["magneto"],
        grids=sections["grids"],
        solver=sections["solver"],
        output_dir=data.get("output_dir", ""),
        seed=seed,
    )


def serialize_config(config: RunConfig) -> str:
    """JSON text that parse_config maps back to an equal RunConfig."""
    return json.dumps(config_dict(config), indent=2, sort_keys=True)


def config_dict(config: RunConfig) -> dict:
    return {
        "experiment": config.experiment,
        "system": asdict(config.system),
        "sequence": asdict(config.sequence),
        "magneto": asdict(config.magneto),
        "grids": asdict(config.grids),
        "solver": asdict(config.solver),
        "output_dir": config.output_dir,
        "seed": config.seed,
    }


def apply_override(config_data: dict, key: str, raw_value: str) -> None:
    """Apply one --set override onto a raw config dict.

    Dotted keys address sections directly (system.gamma_spont=0.5); bare
    keys are resolved against all sections and must match exactly one
    field.  Values parse as JSON scalars with a string fallback.
    """
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value

    if "." in key:
        section, fieldname = key.split(".", 1)
        if section not in _SECTION_TYPES and section != "top":
            raise ConfigError(f"unknown config section in override: {section}")
        if section == "top":
            config_data[fieldname] = value
        else:
            config_data.setdefault(section, {})[fieldname] = value
        return

    if key in ("experiment", "output_dir", "seed"):
        config_data[key] = value
        return

    hits = []
    for name, cls in _SECTION_TYPES.items():
        if key in asdict(cls()):
            hits.append(name)
    if not hits:
        raise ConfigError(f"override key {key!r} matches no config field")
    if len(hits) > 1:
        raise ConfigError(
            f"override key {key!r} is ambiguous across sections {hits}; "
            "use section.key"
        )
    config_data.setdefault(hits[0], {})[key] = value
