"""Simulator and analysis toolkit for a driven four-level trion qubit.

Integrates the Lindblad master equation of a charged quantum dot under
shaped dual-pulse driving and reproduces Rabi oscillations, Ramsey
interference, coherence decay, and complete-coherent-control maps, with
least-squares extraction of fringe and decay parameters.
"""

from .config import ConfigError, RunConfig, parse_config, serialize_config
from .experiments import (
    SweepResult,
    coherence_scan,
    control_map,
    low_area_row_maxima,
    rabi_sweep,
    ramsey_fine_scan,
    readout_time_ps,
    signal,
    simulate_sequence,
)
from .fitting import (
    FitError,
    FitReport,
    calibrate_power_axis,
    fit_exponential,
    fit_sinusoid,
)
from .lindblad import (
    CollapseChannel,
    IntegrationError,
    Trajectory,
    expm_propagate,
    integrate,
    lindblad_dissipator,
    master_rhs,
)
from .system import (
    MagnetoModel,
    Pulse,
    PulseSequence,
    SystemParams,
    collapse_channels,
    envelope,
    initial_state,
    laser_frequency,
    peak_for_area,
    rotating_hamiltonian,
    zeeman_lines,
)

__version__ = "0.1.0"

__all__ = [
    "CollapseChannel",
    "ConfigError",
    "FitError",
    "FitReport",
    "IntegrationError",
    "MagnetoModel",
    "Pulse",
    "PulseSequence",
    "RunConfig",
    "SweepResult",
    "SystemParams",
    "Trajectory",
    "calibrate_power_axis",
    "coherence_scan",
    "collapse_channels",
    "control_map",
    "envelope",
    "expm_propagate",
    "fit_exponential",
    "fit_sinusoid",
    "initial_state",
    "integrate",
    "laser_frequency",
    "lindblad_dissipator",
    "low_area_row_maxima",
    "master_rhs",
    "parse_config",
    "peak_for_area",
    "rabi_sweep",
    "ramsey_fine_scan",
    "readout_time_ps",
    "rotating_hamiltonian",
    "serialize_config",
    "signal",
    "simulate_sequence",
    "zeeman_lines",
]
