"""Lindblad right-hand side, adaptive integration, and an expm oracle.

Everything runs on dense 4x4 complex density matrices.  Hamiltonians are in
angular frequency units (rad/ns), rates in ns^-1, times in ns.  The adaptive
integrator is a Dormand-Prince 5(4) embedded pair with the classic dense
output interpolant; it supports batches of density matrices evolving under a
shared time grid (each batch member keeps its own right-hand side
coefficients, the error control takes the worst member).

The independent oracle `expm_propagate` vectorizes the density matrix,
freezes the 16x16 Liouvillian at slice midpoints and applies the matrix
exponential slice by slice (scipy's Pade scaling-and-squaring).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm as _scipy_expm

from .operators import (
    DIM,
    commutator_superop,
    dissipator_superop,
    hermiticity_defect,
    unvec,
    vec,
)

# Density-matrix health thresholds (checked during integration).
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGENVALUE_FLOOR = -1e-7

MIN_STEP_NS = 1e-9
MAX_STEPS = 5_000_000

HAMILTONIAN_HERMITICITY_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Raised on step underflow or a density-matrix invariant breach."""


@dataclass(frozen=True)
class CollapseChannel:
    """A Lindblad collapse operator with either a constant rate or a
    time-dependent real amplitude prefactor.

    For a constant rate g the effective operator is sqrt(g) * operator;
    for a prefactor f(t) it is f(t) * operator (f in ns^-1/2).
    """

    operator: np.ndarray
    rate: Optional[float] = None
    prefactor: Optional[Callable[[float], float]] = None
    label: str = ""

    def __post_init__(self):
        if (self.rate is None) == (self.prefactor is None):
            raise ValueError("exactly one of rate and prefactor must be given")
        if self.rate is not None and self.rate < 0:
            raise ValueError(f"collapse rate must be >= 0, got {self.rate}")

    def effective(self, t: float) -> np.ndarray:
        """Effective operator at time t (ns)."""
        if self.rate is not None:
            return np.sqrt(self.rate) * self.operator
        return self.prefactor(t) * self.operator


def lindblad_dissipator(c: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[c] rho = c rho c^+ - (1/2){c^+ c, rho}."""
    cd = c.conj().T
    cdc = cd @ c
    return c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)


def master_rhs(
    t: float,
    rho: np.ndarray,
    hamiltonian: Callable[[float], np.ndarray],
    channels: Sequence[CollapseChannel],
) -> np.ndarray:
    """d rho / dt = -i [H(t), rho] + sum_j D[c_j(t)] rho.

    Rejects a non-Hermitian H(t); that always signals a frame or
    construction bug upstream.
    """
    h = hamiltonian(t)
    if hermiticity_defect(h) > HAMILTONIAN_HERMITICITY_TOL:
        raise ValueError(
            f"hamiltonian(t={t:g}) is not Hermitian "
            f"(defect {hermiticity_defect(h):.3e})"
        )
    drho = -1j * (h @ rho - rho @ h)
    for ch in channels:
        c = ch.effective(t)
        drho += lindblad_dissipator(c, rho)
    return drho


def liouvillian(
    t: float,
    hamiltonian: Callable[[float], np.ndarray],
    channels: Sequence[CollapseChannel],
) -> np.ndarray:
    """16x16 generator L(t) with vec(d rho/dt) = L vec(rho)."""
    L = commutator_superop(hamiltonian(t))
    for ch in channels:
        L = L + dissipator_superop(ch.effective(t))
    return L


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with dense output
# ---------------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4
# Hairer's dense-output weights for the extra interpolation polynomial.
_D = np.array(
    [
        -12715105075.0 / 11282082432.0,
        0.0,
        87487479700.0 / 32700410799.0,
        -10690763975.0 / 1880347072.0,
        701980252875.0 / 199316789632.0,
        -1453857185.0 / 822651844.0,
        69997945.0 / 29380423.0,
    ]
)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0


class Trajectory:
    """Sampled evolution: times (ns) and 4x4 density matrices."""

    def __init__(self, times: np.ndarray, states: np.ndarray):
        self.times = times
        self.states = states

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def final(self) -> np.ndarray:
        return self.states[-1]

    def population(self, level: int) -> np.ndarray:
        """Real diagonal occupation of a 1-indexed level along the trajectory."""
        return self.states[:, level - 1, level - 1].real


def _check_state_batch(y: np.ndarray, t: float, check_positivity: bool) -> None:
    """Invariant checks on a (B, 16) batch of vectorized density matrices."""
    # C-order reshape of a column-stacked vector gives the transpose.
    rho = y.reshape(-1, DIM, DIM).transpose(0, 2, 1)
    herm = np.abs(rho - rho.conj().transpose(0, 2, 1)).max()
    if herm > HERMITICITY_TOL:
        raise IntegrationError(
            f"hermiticity defect {herm:.3e} > {HERMITICITY_TOL:g} at t={t:g} ns"
        )
    tr = np.abs(np.einsum("bii->b", rho) - 1.0).max()
    if tr > TRACE_TOL:
        raise IntegrationError(
            f"trace defect {tr:.3e} > {TRACE_TOL:g} at t={t:g} ns"
        )
    if check_positivity:
        w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().transpose(0, 2, 1)))
        if w.min() < EIGENVALUE_FLOOR:
            raise IntegrationError(
                f"negative eigenvalue {w.min():.3e} < {EIGENVALUE_FLOOR:g} "
                f"at t={t:g} ns"
            )


def integrate_batch(
    y0: np.ndarray,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    tol: float,
    sample_times: Optional[np.ndarray] = None,
    check_invariants: bool = True,
    check_positivity: bool = False,
    max_step: Optional[float] = None,
):
    """Propagate a (B, 16) batch of vectorized states from t0 to t1.

    `rhs(t, y)` must return dy/dt with the same shape as y.  The embedded
    4th-order error estimate is controlled against atol = rtol = tol per
    entry, taking the maximum over the batch, so every batch member
    individually satisfies the tolerance.

    Returns (times, values, stats) where values[k] is the batch state at
    sample time k.  With sample_times=None only t0 and t1 are returned.
    """
    if not t1 > t0:
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    if not (1e-12 <= tol <= 1e-4):
        raise ValueError(f"tol must be in [1e-12, 1e-4], got {tol}")

    y = np.array(y0, dtype=complex)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[None, :]

    if sample_times is None:
        out_times = np.array([t0, t1])
    else:
        out_times = np.asarray(sample_times, dtype=float)
        if out_times[0] != t0 or out_times[-1] != t1 or np.any(np.diff(out_times) <= 0):
            raise ValueError("sample_times must increase strictly from t0 to t1")
    out = np.empty((len(out_times), *y.shape), dtype=complex)
    out[0] = y
    next_out = 1

    stats = StepStats()
    t = t0
    k = np.empty((7, *y.shape), dtype=complex)
    k[0] = rhs(t, y)
    stats.rhs_evals += 1

    # Initial step: resolve the fastest local scale, then let control adapt.
    scale = np.abs(y).max() + tol
    h = min(0.01 * (t1 - t0), (tol ** 0.2) * scale / (np.abs(k[0]).max() + 1e-30))
    h = max(h, MIN_STEP_NS * 10)
    if max_step is not None:
        h = min(h, max_step)

    while t < t1:
        if stats.accepted + stats.rejected > MAX_STEPS:
            raise IntegrationError(f"step budget exceeded at t={t:g} ns")
        h = min(h, t1 - t)
        if h < MIN_STEP_NS:
            raise IntegrationError(
                f"step underflow (h={h:.3e} ns < {MIN_STEP_NS:g}) at t={t:g} ns"
            )

        for i in range(1, 7):
            yi = y + h * np.tensordot(_A[i], k[:i], axes=(0, 0))
            k[i] = rhs(t + _C[i] * h, yi)
        stats.rhs_evals += 6

        y5 = y + h * np.tensordot(_B5, k, axes=(0, 0))
        err_vec = h * np.tensordot(_E, k, axes=(0, 0))
        denom = tol * (1.0 + np.abs(y))
        err = float((np.abs(err_vec) / denom).max())

        if err <= 1.0:
            t_new = t + h
            if check_invariants:
                _check_state_batch(y5, t_new, check_positivity=False)
            # dense output across the accepted step
            while next_out < len(out_times) and out_times[next_out] <= t_new + 1e-15:
                ts = out_times[next_out]
                if ts >= t_new - 1e-15:
                    out[next_out] = y5
                else:
                    theta = (ts - t) / h
                    ydiff = y5 - y
                    bspl = h * k[0] - ydiff
                    r4 = ydiff - h * k[6] - bspl
                    r5 = h * np.tensordot(_D, k, axes=(0, 0))
                    out[next_out] = y + theta * (
                        ydiff + (1 - theta) * (bspl + theta * (r4 + (1 - theta) * r5))
                    )
                if check_invariants and check_positivity:
                    _check_state_batch(out[next_out], out_times[next_out], True)
                next_out += 1
            k[0] = k[6]  # FSAL
            y = y5
            t = t_new
            stats.accepted += 1
            factor = 0.9 * err ** -0.2 if err > 1e-10 else 5.0
            h *= min(5.0, max(0.2, factor))
        else:
            stats.rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
        if max_step is not None:
            h = min(h, max_step)

    if check_invariants:
        _check_state_batch(y, t, check_positivity=True)
    if squeeze:
        out = out[:, 0, :]
    return out_times, out, stats


def integrate(
    rho0: np.ndarray,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    t1: float,
    tol: float = 1e-9,
    sample_dt: Optional[float] = 1e-4,
    check_positivity: bool = True,
) -> Trajectory:
    """Adaptive evolution of a single density matrix.

    `rhs(t, rho)` works on 4x4 matrices (e.g. a closure over `master_rhs`).
    `sample_dt` is the dense-output spacing in ns (default 0.1 ps); pass
    None to record only the endpoints.  Positivity is verified at output
    times, hermiticity and trace after every accepted step.
    """
    if sample_dt is not None:
        n = max(2, int(np.ceil((t1 - t0) / sample_dt)) + 1)
        sample_times = np.linspace(t0, t1, n)
    else:
        sample_times = None

    def rhs_vec(t, y):
        return vec(rhs(t, unvec(y[0])))[None, :]

    times, values, _ = integrate_batch(
        vec(rho0)[None, :],
        rhs_vec,
        t0,
        t1,
        tol,
        sample_times=sample_times,
        check_positivity=check_positivity,
    )
    states = np.empty((len(times), DIM, DIM), dtype=complex)
    for i in range(len(times)):
        states[i] = unvec(values[i, 0])
    return Trajectory(times, states)


def expm_propagate(
    rho0: np.ndarray,
    hamiltonian: Callable[[float], np.ndarray],
    channels: Sequence[CollapseChannel],
    t0: float,
    t1: float,
    n_slices: int,
) -> np.ndarray:
    """Piecewise-constant matrix-exponential propagation (test oracle).

    The 16x16 Liouvillian is frozen at each slice midpoint and exponentiated
    with scipy's Pade scaling-and-squaring.  Exact for time-independent
    generators at any n_slices; converges to the true solution otherwise.
    """
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    edges = np.linspace(t0, t1, n_slices + 1)
    v = vec(rho0)
    for a, b in zip(edges[:-1], edges[1:]):
        L = liouvillian(0.5 * (a + b), hamiltonian, channels)
        v = _scipy_expm(L * (b - a)) @ v
    return unvec(v)
