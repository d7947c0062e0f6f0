"""Parameter sweeps reproducing the modelled panels (Rabi, Ramsey, coherence
decay, complete coherent control) and the detected-signal observable.

The detected signal is the population of level 3 at the readout time
t1 = t0 + dt + tau_FWHM (t0 = first-pulse center = 0; dt = 0 for single-pulse
runs), proportional to the photon counts collected from the 3->1 transition.

Sweep execution
---------------
The master equation is linear, so all points that share a time grid (the
innermost sweep axis: pulse areas in a Rabi sweep, fine delays in a Ramsey
scan) integrate together as one batched linear ODE with shared adaptive
steps; every batch member is individually error controlled.  Batches are
defined by the grid alone, never by the worker count, so serial and
concurrent execution give bit-identical grids.  TRION_THREADS caps the
process pool (default: available parallelism).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .lindblad import Trajectory, integrate, integrate_batch, master_rhs
from .operators import commutator_superop, dissipator_superop, s, vec
from .system import (
    FOUR_LN2,
    PulseSequence,
    SystemParams,
    TWO_PI,
    collapse_channels,
    hamiltonian_fn,
    initial_state,
    laser_frequency,
    peak_for_area,
    rotating_diag_ghz,
    second_pulse_phase,
)

# vec index of the (3,3) entry under column stacking
_RHO33_INDEX = 10

WINDOW_SIGMA = 3.2  # window start at -3.2 FWHM, envelope < 1e-12 of peak


def readout_time_ps(seq: PulseSequence) -> float:
    """Signal readout time t1 relative to the first-pulse center.

    Dual-pulse runs read out at t1 = t0 + dt + tau_FWHM.  The single-pulse
    readout time is not pinned by that rule (dt is undefined); here it is
    the end of the integration window, 3.2 tau_FWHM, once the pulse has
    fully passed, which keeps the population free of the ~1% of pulse area
    that arrives after t0 + tau_FWHM.
    """
    if seq.second_pulse_enabled:
        return seq.total_delay_ps() + seq.pulse.fwhm
    return WINDOW_SIGMA * seq.pulse.fwhm


def window_ps(seq: PulseSequence) -> tuple:
    return (-WINDOW_SIGMA * seq.pulse.fwhm, readout_time_ps(seq))


def signal(
    trajectory: Trajectory,
    seq: PulseSequence,
    mode: str = "population",
    params: Optional[SystemParams] = None,
) -> float:
    """Detected-signal scalar from a trajectory.

    "population": rho_33 at t1.  "integrated-emission":
    (gamma_spont/2) * integral(rho_33 dt) over the trajectory, the photon
    yield of the monitored 3->1 channel.
    """
    t1 = readout_time_ps(seq) * 1e-3
    if trajectory.times[-1] < t1 - 1e-12 or trajectory.times[0] > t1:
        raise ValueError(
            f"trajectory [{trajectory.times[0]:g}, {trajectory.times[-1]:g}] ns "
            f"does not cover t1={t1:g} ns"
        )
    p33 = trajectory.population(3)
    if mode == "population":
        return float(np.interp(t1, trajectory.times, p33))
    if mode == "integrated-emission":
        if params is None:
            raise ValueError("integrated-emission mode needs params")
        return float(0.5 * params.gamma_spont * np.trapezoid(p33, trajectory.times))
    raise ValueError(f"unknown signal mode {mode!r}")


# ---------------------------------------------------------------------------
# Compiled batched generator
# ---------------------------------------------------------------------------


class _BatchedGenerator:
    """Vectorized Liouvillian action for a batch of sweep points.

    All points share the system parameters, detuning and pulse shape; the
    per-point data are the two pulse peaks, the total delay and the
    interpulse phase.  dY/dt = Y L_static^T + Re(E) Y L_a^T + Im(E) Y L_b^T
    + f^2 Y L_ph^T with E the complex drive entry and f the phonon
    prefactor.
    """

    def __init__(
        self,
        params: SystemParams,
        template: PulseSequence,
        peaks_ghz: np.ndarray,
        delays_ns: np.ndarray,
        phases: np.ndarray,
        second_pulse: bool,
        lab_omega0_ghz: Optional[float] = None,
    ):
        if lab_omega0_ghz is None:
            diag_ghz = rotating_diag_ghz(params, template.detuning)
            self.lab_wl = None
        else:
            gs, tr = params.delta_e_gs, params.delta_e_tr
            w0 = lab_omega0_ghz
            diag_ghz = np.array([-gs / 2.0, gs / 2.0, w0 - tr / 2.0, w0 + tr / 2.0])
            from dataclasses import replace as _replace

            self.lab_wl = TWO_PI * laser_frequency(
                _replace(params, omega0=w0), template.detuning
            )
        diag = np.diag(TWO_PI * diag_ghz).astype(complex)
        l_static = commutator_superop(diag)
        for ch in collapse_channels(params, template):
            if ch.rate is not None:
                l_static = l_static + dissipator_superop(
                    math.sqrt(ch.rate) * ch.operator
                )
        drive_a = s(1, 4) + s(2, 3) + s(4, 1) + s(3, 2)
        drive_b = 1j * (s(1, 4) + s(2, 3)) - 1j * (s(4, 1) + s(3, 2))
        self.l_static_t = np.ascontiguousarray(l_static.T)
        self.l_a_t = np.ascontiguousarray(commutator_superop(drive_a).T)
        self.l_b_t = np.ascontiguousarray(commutator_superop(drive_b).T)
        self.l_ph_t = np.ascontiguousarray(
            (dissipator_superop(s(3, 3)) + dissipator_superop(s(4, 4))).T
        )
        self.peak_rad = TWO_PI * np.asarray(peaks_ghz, dtype=float)
        self.delays_ns = np.asarray(delays_ns, dtype=float)
        self.cos_phase = np.cos(phases)
        self.sin_phase = np.sin(phases)
        self.second_pulse = second_pulse
        self.fwhm_ns = template.pulse.fwhm * 1e-3
        self.root_alpha = params.phonon_scale * math.sqrt(params.alpha_phonon)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        u = t / self.fwhm_ns
        g1 = self.peak_rad * math.exp(-FOUR_LN2 * u * u)
        if self.second_pulse:
            v = (t - self.delays_ns) / self.fwhm_ns
            g2 = self.peak_rad * np.exp(-FOUR_LN2 * v * v)
            e_re = g1 + g2 * self.cos_phase
            e_im = g2 * self.sin_phase
            f2 = (self.root_alpha * (g1 + g2)) ** 2
        else:
            e_re = g1 if isinstance(g1, np.ndarray) else np.full(
                y.shape[0], g1
            )
            e_im = np.zeros_like(e_re)
            f2 = (self.root_alpha * e_re) ** 2
        if self.lab_wl is not None:
            c, s_ = math.cos(self.lab_wl * t), math.sin(self.lab_wl * t)
            e_re, e_im = e_re * c - e_im * s_, e_re * s_ + e_im * c
        out = y @ self.l_static_t
        out += e_re[:, None] * (y @ self.l_a_t)
        out += e_im[:, None] * (y @ self.l_b_t)
        out += f2[:, None] * (y @ self.l_ph_t)
        return out


def _execute_batch(
    params: SystemParams,
    template: PulseSequence,
    areas_pi: Optional[np.ndarray],
    fine_delays_fs: Optional[np.ndarray],
    tol: float,
):
    """Integrate one batch and return per-point rho_33(t1) plus step stats."""
    if areas_pi is not None and fine_delays_fs is not None:
        raise ValueError("batch varies exactly one of area and fine delay")
    if areas_pi is not None:
        n = len(areas_pi)
        peaks = np.array([peak_for_area(a, template.pulse.fwhm) for a in areas_pi])
        fines = np.full(n, template.fine_delay)
    else:
        fines = np.asarray(fine_delays_fs, dtype=float)
        n = len(fines)
        peaks = np.full(n, template.pulse.peak)

    seqs = [
        PulseSequence(
            pulse=type(template.pulse)(
                peak=peaks[i], fwhm=template.pulse.fwhm, center=0.0
            ),
            coarse_delay=template.coarse_delay,
            fine_delay=fines[i],
            detuning=template.detuning,
            second_pulse_enabled=template.second_pulse_enabled,
        )
        for i in range(n)
    ]
    delays_ns = np.array([sq.total_delay_ps() * 1e-3 for sq in seqs])
    if template.second_pulse_enabled:
        phases = np.array([second_pulse_phase(params, sq) for sq in seqs])
    else:
        phases = np.zeros(n)

    gen = _BatchedGenerator(
        params, template, peaks, delays_ns, phases, template.second_pulse_enabled
    )

    t1s = np.array([readout_time_ps(sq) * 1e-3 for sq in seqs])
    t0 = -WINDOW_SIGMA * template.pulse.fwhm * 1e-3
    unique_t1 = np.unique(t1s)
    sample_times = np.concatenate(([t0], unique_t1))

    y0 = np.tile(vec(initial_state(params)), (n, 1))
    times, values, stats = integrate_batch(
        y0, gen, t0, float(unique_t1[-1]), tol, sample_times=sample_times
    )
    sample_index = np.searchsorted(unique_t1, t1s) + 1
    signals = values[sample_index, np.arange(n), _RHO33_INDEX].real
    return signals, stats


def _batch_worker(payload):
    idx, params, template, areas, fines, tol = payload
    signals, stats = _execute_batch(params, template, areas, fines, tol)
    return idx, signals, (stats.accepted, stats.rejected, stats.rhs_evals)


def worker_count(n_tasks: int) -> int:
    env = os.environ.get("TRION_THREADS", "")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _run_tasks(payloads):
    """Run batch payloads, in-process or on a pool; order-stable results."""
    n = len(payloads)
    workers = worker_count(n)
    results = [None] * n
    if workers == 1 or n == 1:
        for p in payloads:
            idx, signals, stats = _batch_worker(p)
            results[idx] = (signals, stats)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for idx, signals, stats in ex.map(_batch_worker, payloads):
                results[idx] = (signals, stats)
    return results


# ---------------------------------------------------------------------------
# Sweep results
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    """Labeled signal grid over swept parameters plus the run manifest."""

    axes: Dict[str, np.ndarray]
    values: np.ndarray
    manifest: dict
    value_label: str = "signal"

    def __post_init__(self):
        shape = tuple(len(v) for v in self.axes.values())
        if self.values.shape != shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match axes {shape}"
            )
        if self.manifest.get("signal_mode") == "population":
            lo, hi = self.values.min(), self.values.max()
            if lo < -1e-7 or hi > 1.0 + 1e-7:
                raise ValueError(
                    f"population signal outside [0, 1]: min={lo:g}, max={hi:g}"
                )
            np.clip(self.values, 0.0, 1.0, out=self.values)

    def rows(self):
        """Long-format iteration: one (axis values..., signal) tuple per point."""
        grids = np.meshgrid(*self.axes.values(), indexing="ij")
        flat = [g.ravel() for g in grids]
        vals = self.values.ravel()
        for i in range(vals.size):
            yield tuple(f[i] for f in flat) + (vals[i],)


def _manifest(
    params: SystemParams,
    template: PulseSequence,
    tol: float,
    signal_mode: str,
    extras: dict,
    stats_list,
    wall_time: float,
) -> dict:
    accepted = sum(st[0] for _, st in stats_list)
    rejected = sum(st[1] for _, st in stats_list)
    evals = sum(st[2] for _, st in stats_list)
    man = {
        "system": asdict(params),
        "sequence": asdict(template),
        "solver": {"tol": tol},
        "kappa": params.phonon_scale,
        "signal_mode": signal_mode,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "solver_stats": {
            "accepted_steps": accepted,
            "rejected_steps": rejected,
            "rhs_evals": evals,
            "wall_time_s": round(wall_time, 3),
        },
    }
    man.update(extras)
    return man


# ---------------------------------------------------------------------------
# The four experiments
# ---------------------------------------------------------------------------


def rabi_sweep(
    params: SystemParams,
    areas_pi: Sequence[float],
    detuning: float = 0.0,
    fwhm_ps: float = 23.0,
    tol: float = 1e-9,
) -> SweepResult:
    """Signal versus single-pulse area (the Rabi oscillation panel)."""
    areas = np.asarray(list(areas_pi), dtype=float)
    template = PulseSequence.single(0.0, fwhm_ps=fwhm_ps, detuning=detuning)
    t_start = time.perf_counter()
    payloads = [(0, params, template, areas, None, tol)]
    results = _run_tasks(payloads)
    values = results[0][0]
    man = _manifest(
        params,
        template,
        tol,
        "population",
        {"experiment": "rabi", "detuning_ghz": detuning},
        [results[0]],
        time.perf_counter() - t_start,
    )
    return SweepResult(axes={"area_pi": areas}, values=values, manifest=man)


def ramsey_fine_scan(
    params: SystemParams,
    coarse_delay_ps: float,
    fine_delays_fs: Sequence[float],
    area_pi: float = 0.5,
    detuning: float = 0.0,
    fwhm_ps: float = 23.0,
    tol: float = 1e-9,
) -> SweepResult:
    """Signal versus fine interpulse delay at fixed coarse delay.

    Each pulse defaults to area pi/2; fringes oscillate at the optical
    period of the laser (about 3 fs here).
    """
    fines = np.asarray(list(fine_delays_fs), dtype=float)
    template = PulseSequence.double(
        area_pi, coarse_delay_ps, 0.0, fwhm_ps=fwhm_ps, detuning=detuning
    )
    t_start = time.perf_counter()
    results = _run_tasks([(0, params, template, None, fines, tol)])
    man = _manifest(
        params,
        template,
        tol,
        "population",
        {
            "experiment": "ramsey",
            "detuning_ghz": detuning,
            "coarse_delay_ps": coarse_delay_ps,
            "area_pi": area_pi,
            "laser_frequency_ghz": laser_frequency(params, detuning),
        },
        [results[0]],
        time.perf_counter() - t_start,
    )
    return SweepResult(axes={"fine_delay_fs": fines}, values=results[0][0], manifest=man)


def coherence_scan(
    params: SystemParams,
    coarse_delays_ps: Sequence[float],
    fine_delays_fs: Sequence[float],
    area_pi: float = 0.5,
    detuning: float = 0.0,
    fwhm_ps: float = 23.0,
    tol: float = 1e-9,
) -> SweepResult:
    """Ramsey fringe amplitude versus coarse delay (the T2* measurement).

    Runs a fine scan per coarse delay and extracts the fringe amplitude
    with the sinusoid fitter.  A failed fringe fit aborts with the
    offending coarse delay named.
    """
    from .fitting import FitError, fit_sinusoid

    coarses = np.asarray(list(coarse_delays_ps), dtype=float)
    fines = np.asarray(list(fine_delays_fs), dtype=float)
    freq_hint = laser_frequency(params, detuning) * 1e-6  # cycles/fs

    t_start = time.perf_counter()
    payloads = []
    for i, tc in enumerate(coarses):
        template = PulseSequence.double(
            area_pi, float(tc), 0.0, fwhm_ps=fwhm_ps, detuning=detuning
        )
        payloads.append((i, params, template, None, fines, tol))
    results = _run_tasks(payloads)

    amplitudes = np.empty(len(coarses))
    for i, tc in enumerate(coarses):
        report = fit_sinusoid(fines, results[i][0], freq_hint)
        if not report.converged:
            raise FitError(
                f"fringe fit did not converge at coarse delay {tc:g} ps"
            )
        amplitudes[i] = report.parameters["amplitude"]

    template = PulseSequence.double(
        area_pi, float(coarses[0]), 0.0, fwhm_ps=fwhm_ps, detuning=detuning
    )
    man = _manifest(
        params,
        template,
        tol,
        "population",
        {
            "experiment": "coherence",
            "detuning_ghz": detuning,
            "area_pi": area_pi,
            "fine_delays_fs": fines.tolist(),
            "fringe_freq_hint_per_fs": freq_hint,
        },
        results,
        time.perf_counter() - t_start,
    )
    man["signal_mode"] = "amplitude"
    return SweepResult(
        axes={"coarse_delay_ps": coarses},
        values=amplitudes,
        manifest=man,
        value_label="amplitude",
    )


def control_map(
    params: SystemParams,
    areas_pi: Sequence[float],
    fine_delays_fs: Sequence[float],
    coarse_delay_ps: float = 80.0,
    detuning: float = 0.0,
    fwhm_ps: float = 23.0,
    tol: float = 1e-9,
) -> SweepResult:
    """2-D signal grid over (pulse area, fine delay), both pulses sharing
    the swept area (the complete-coherent-control map)."""
    areas = np.asarray(list(areas_pi), dtype=float)
    fines = np.asarray(list(fine_delays_fs), dtype=float)

    t_start = time.perf_counter()
    payloads = []
    for i, a in enumerate(areas):
        template = PulseSequence.double(
            float(a), coarse_delay_ps, 0.0, fwhm_ps=fwhm_ps, detuning=detuning
        )
        payloads.append((i, params, template, None, fines, tol))
    results = _run_tasks(payloads)
    values = np.stack([r[0] for r in results])

    template = PulseSequence.double(
        0.0, coarse_delay_ps, 0.0, fwhm_ps=fwhm_ps, detuning=detuning
    )
    man = _manifest(
        params,
        template,
        tol,
        "population",
        {
            "experiment": "map",
            "detuning_ghz": detuning,
            "coarse_delay_ps": coarse_delay_ps,
        },
        results,
        time.perf_counter() - t_start,
    )
    return SweepResult(
        axes={"area_pi": areas, "fine_delay_fs": fines}, values=values, manifest=man
    )


# ---------------------------------------------------------------------------
# Single-point simulation (transparent path) and map morphology
# ---------------------------------------------------------------------------


def simulate_sequence(
    params: SystemParams,
    seq: PulseSequence,
    tol: float = 1e-9,
    sample_dt_ns: Optional[float] = None,
    frame: str = "rotating",
    omega0_ghz: Optional[float] = None,
    dissipation: bool = True,
    initial: Optional[np.ndarray] = None,
    compiled: bool = False,
) -> Trajectory:
    """Integrate one pulse sequence.

    By default the right-hand side is assembled transparently from the
    Hamiltonian callable and the collapse-channel list on every
    evaluation, which is what the test oracles compare against.  With
    compiled=True the precomputed-superoperator fast path is used instead
    (identical results to round-off; cross-checked in the test suite).
    """
    rho0 = initial_state(params) if initial is None else initial
    t0, t1 = window_ps(seq)

    if compiled:
        if not dissipation:
            params = replace_dissipation_off(params)
        gen = _BatchedGenerator(
            params,
            seq,
            np.array([seq.pulse.peak]),
            np.array([seq.total_delay_ps() * 1e-3]),
            np.array(
                [second_pulse_phase(params, seq) if seq.second_pulse_enabled else 0.0]
            ),
            seq.second_pulse_enabled,
            lab_omega0_ghz=omega0_ghz if frame == "lab" else None,
        )
        if sample_dt_ns is not None:
            n = max(2, int(np.ceil((t1 - t0) * 1e-3 / sample_dt_ns)) + 1)
            samples = np.linspace(t0 * 1e-3, t1 * 1e-3, n)
        else:
            samples = None
        times, values, _ = integrate_batch(
            vec(rho0)[None, :], gen, t0 * 1e-3, t1 * 1e-3, tol, sample_times=samples
        )
        states = values[:, 0, :].reshape(-1, 4, 4).transpose(0, 2, 1)
        return Trajectory(times, states)

    h = hamiltonian_fn(params, seq, frame=frame, omega0_ghz=omega0_ghz)
    channels = collapse_channels(params, seq) if dissipation else []

    def rhs(t, rho):
        return master_rhs(t, rho, h, channels)

    return integrate(
        rho0, rhs, t0 * 1e-3, t1 * 1e-3, tol=tol, sample_dt=sample_dt_ns
    )


def replace_dissipation_off(params: SystemParams) -> SystemParams:
    """Copy of params with every dissipative rate zeroed."""
    from dataclasses import replace

    return replace(
        params, gamma_spont=0.0, gamma_pump=0.0, gamma_deph=0.0, alpha_phonon=0.0
    )


def count_row_maxima(row: np.ndarray, prominence: float) -> int:
    """Number of distinct local maxima along one map row."""
    peaks, _ = find_peaks(row, prominence=prominence)
    return int(len(peaks))


def low_area_row_maxima(result: SweepResult, prominence_frac: float = 0.005) -> int:
    """Distinct local maxima along the lowest nonzero-area row of a map.

    The prominence floor is a fraction of the map's global maximum, so maps
    are compared on a common absolute scale.
    """
    areas = result.axes["area_pi"]
    idx = 1 if areas[0] == 0.0 and len(areas) > 1 else 0
    prominence = prominence_frac * float(result.values.max())
    return count_row_maxima(result.values[idx], prominence)
