"""Built-in verification battery behind `trion-dynamics selftest`.

A fast subset of the acceptance suite: dissipator identities, invariant
preservation on seeded random configurations, the integrate-vs-expm oracle
cross-check, the analytic two-level limit, Zeeman values, and fitter
recovery.  Prints one line per check.
"""

from __future__ import annotations

import math

import numpy as np

from .experiments import simulate_sequence
from .fitting import fit_exponential, fit_sinusoid
from .lindblad import expm_propagate, lindblad_dissipator, master_rhs
from .operators import hermiticity_defect, min_eigenvalue, s, trace_defect
from .system import (
    MagnetoModel,
    Pulse,
    PulseSequence,
    SystemParams,
    collapse_channels,
    hamiltonian_fn,
    zeeman_lines,
)


def random_configuration(rng: np.random.Generator):
    """A pulse sequence drawn within the published parameter ranges."""
    peak = rng.uniform(0.2, 4.46)
    detuning = rng.uniform(-20.0, 20.0)
    dual = bool(rng.integers(0, 2))
    if dual:
        return PulseSequence(
            pulse=Pulse(peak=peak, fwhm=23.0),
            coarse_delay=float(rng.uniform(60.0, 180.0)),
            fine_delay=float(rng.uniform(0.0, 11.0)),
            detuning=detuning,
            second_pulse_enabled=True,
        )
    return PulseSequence(
        pulse=Pulse(peak=peak, fwhm=23.0),
        coarse_delay=0.0,
        fine_delay=0.0,
        detuning=detuning,
        second_pulse_enabled=False,
    )


def check_dissipator() -> bool:
    rho = 0.5 * (s(2, 2) + s(2, 3) + s(3, 2) + s(3, 3))
    d = lindblad_dissipator(s(1, 3), rho)
    expected = 0.5 * s(1, 1) - 0.25 * (s(2, 3) + s(3, 2)) - 0.5 * s(3, 3)
    ok = np.abs(d - expected).max() < 1e-12
    ok &= np.abs(lindblad_dissipator(np.zeros((4, 4)), rho)).max() == 0.0
    return bool(ok)


def check_invariants(n_configs: int = 5, seed: int = 7) -> bool:
    rng = np.random.default_rng(seed)
    params = SystemParams()
    for _ in range(n_configs):
        seq = random_configuration(rng)
        traj = simulate_sequence(params, seq, tol=1e-9, sample_dt_ns=2e-3)
        for t, rho in traj:
            if trace_defect(rho) > 1e-8:
                return False
            if hermiticity_defect(rho) > 1e-10:
                return False
            if min_eigenvalue(rho) < -1e-7:
                return False
    return True


def check_oracle(seed: int = 11) -> bool:
    rng = np.random.default_rng(seed)
    params = SystemParams()
    seq = random_configuration(rng)
    traj = simulate_sequence(params, seq, tol=1e-10, sample_dt_ns=None)
    h = hamiltonian_fn(params, seq)
    rho_oracle = expm_propagate(
        traj.states[0],
        h,
        collapse_channels(params, seq),
        traj.times[0],
        traj.times[-1],
        n_slices=2000,
    )
    return bool(np.abs(traj.final() - rho_oracle).max() < 1e-6)


def check_two_level() -> bool:
    params = SystemParams(
        gamma_spont=0.0, gamma_pump=0.0, gamma_deph=0.0, alpha_phonon=0.0
    )
    seq = PulseSequence.single(1.0)
    traj = simulate_sequence(params, seq, initial=s(2, 2), sample_dt_ns=None)
    return bool(abs(traj.final()[2, 2].real - 1.0) < 1e-4)


def check_linearity(seed: int = 3) -> bool:
    rng = np.random.default_rng(seed)
    params = SystemParams()
    seq = random_configuration(rng)
    h = hamiltonian_fn(params, seq)
    channels = collapse_channels(params, seq)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho1, rho2 = a @ a.conj().T, b @ b.conj().T
    rho1 /= np.trace(rho1).real
    rho2 /= np.trace(rho2).real
    t = 0.004
    lhs = master_rhs(t, 0.3 * rho1 + 0.7 * rho2, h, channels)
    rhs_ = 0.3 * master_rhs(t, rho1, h, channels) + 0.7 * master_rhs(
        t, rho2, h, channels
    )
    return bool(np.abs(lhs - rhs_).max() < 1e-12)


def check_zeeman_values() -> bool:
    model = MagnetoModel()
    lines = zeeman_lines(model, 5.0)
    ground_ghz = (lines[3] - lines[0] + lines[2] - lines[1]) / 2.0 / 4.135667696
    trion_ghz = (lines[3] - lines[2] + lines[1] - lines[0]) / 2.0 / 4.135667696
    ok = abs(ground_ghz - 104.2) / 104.2 < 0.002
    ok &= abs(trion_ghz - 15.1) / 15.1 < 0.025
    diamag = model.diamagnetic * 25.0
    ok &= abs(diamag - 178.25) < 1e-9
    return bool(ok)


def check_fitters() -> bool:
    x = np.linspace(0.0, 11.0, 111)
    y = 0.5 + 0.3 * np.cos(2 * math.pi * x / 3.0 + 0.4)
    rep = fit_sinusoid(x, y, 1.0 / 3.0)
    ok = rep.converged
    ok &= abs(rep.parameters["amplitude"] - 0.3) < 1e-9
    ok &= abs(rep.parameters["frequency"] - 1.0 / 3.0) < 1e-9

    xd = np.linspace(80.0, 180.0, 31)
    yd = np.exp(-xd / 43.0)
    repd = fit_exponential(xd, yd)
    ok &= repd.converged and abs(repd.parameters["tau"] - 43.0) / 43.0 < 0.005
    return bool(ok)


CHECKS = [
    ("dissipator identities", check_dissipator),
    ("rhs linearity", check_linearity),
    ("invariant preservation (5 seeded configs)", check_invariants),
    ("integrate vs expm oracle", check_oracle),
    ("two-level pi-pulse inversion", check_two_level),
    ("zeeman line positions", check_zeeman_values),
    ("fitter synthetic recovery", check_fitters),
]


def run_selftest() -> int:
    """Run all checks; returns the number of failures."""
    failures = 0
    for name, fn in CHECKS:
        try:
            ok = fn()
        except Exception as exc:  # a crash is a failure with a reason
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    print(f"selftest: {len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
