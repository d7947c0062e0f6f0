"""Least-squares fitting: fringe sinusoids, exponential decay, and the
power-axis calibration of measured Rabi data against a model curve.

The workhorse is a damped least-squares (Levenberg-Marquardt) loop with
analytic Jacobians: steps solve (J^T J + lam diag(J^T J)) d = -J^T r and
are accepted only when the residual decreases, so the residual norm is
non-increasing over accepted iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline


class FitError(RuntimeError):
    pass


@dataclass
class FitReport:
    """Named parameter estimates with convergence diagnostics."""

    parameters: dict
    residual_norm: float  # root-mean-square residual
    converged: bool
    iterations: int
    covariance: Optional[np.ndarray] = None
    degenerate: bool = False
    message: str = ""


@dataclass
class _LMResult:
    x: np.ndarray
    converged: bool
    iterations: int
    sse_history: list = field(default_factory=list)


GRAD_TOL_FACTOR = 1e-10
MAX_ITERATIONS = 200


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iter: int = MAX_ITERATIONS,
) -> _LMResult:
    """Damped least-squares minimization of ||residual(x)||^2.

    Adaptive damping interpolates between Gauss-Newton and gradient
    descent; convergence when the gradient norm drops below
    GRAD_TOL_FACTOR * (1 + rms residual).
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    sse = float(r @ r)
    lam = 1e-3
    history = [sse]

    for it in range(1, max_iter + 1):
        J = jacobian(x)
        g = J.T @ r
        rms = math.sqrt(sse / len(r))
        if np.linalg.norm(g) < GRAD_TOL_FACTOR * (1.0 + rms):
            return _LMResult(x, True, it, history)
        jtj = J.T @ J
        d = np.diag(jtj).copy()
        d[d <= 0] = 1.0
        stepped = False
        for _ in range(60):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_try = x + step
            r_try = residual(x_try)
            sse_try = float(r_try @ r_try)
            if np.isfinite(sse_try) and sse_try <= sse:
                improved = sse - sse_try
                x, r, sse = x_try, r_try, sse_try
                history.append(sse)
                lam = max(lam / 10.0, 1e-14)
                stepped = True
                if improved <= 1e-30 * (1.0 + sse):
                    return _LMResult(x, True, it, history)
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not stepped:
            # damping exhausted: either converged to machine noise or stuck
            converged = np.linalg.norm(g) < 1e-6 * (1.0 + math.sqrt(sse / len(r)))
            return _LMResult(x, converged, it, history)
    return _LMResult(x, False, max_iter, history)


def numeric_jacobian(
    residual: Callable[[np.ndarray], np.ndarray], x: np.ndarray, rel_h: float = 1e-6
) -> np.ndarray:
    """Central finite-difference Jacobian, for verifying analytic ones."""
    x = np.asarray(x, dtype=float)
    r0 = residual(x)
    J = np.empty((len(r0), len(x)))
    for j in range(len(x)):
        h = rel_h * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (residual(xp) - residual(xm)) / (2.0 * h)
    return J


def _covariance(J: np.ndarray, r: np.ndarray) -> Optional[np.ndarray]:
    n, p = J.shape
    if n <= p:
        return None
    sigma2 = float(r @ r) / (n - p)
    try:
        return sigma2 * np.linalg.pinv(J.T @ J)
    except np.linalg.LinAlgError:
        return None


# ---------------------------------------------------------------------------
# Sinusoid
# ---------------------------------------------------------------------------


def fit_sinusoid(x, y, freq_hint: float) -> FitReport:
    """Fit y = offset + amplitude cos(2 pi f x + phase).

    x in fs, freq_hint in cycles/fs.  A linear solve for
    (offset, a, b) on a frequency grid around the hint makes the start
    global; one damped nonlinear polish then releases the frequency.
    Needs >= 8 points spanning >= 1.5 periods of the hint.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 8:
        raise ValueError(f"need >= 8 points, got {len(x)}")
    if freq_hint <= 0:
        raise ValueError("freq_hint must be > 0")
    span = float(x.max() - x.min())
    if span * freq_hint < 1.5:
        raise ValueError(
            f"x spans {span * freq_hint:.2f} periods of freq_hint, need >= 1.5"
        )

    def linear_fit(f):
        w = 2.0 * math.pi * f
        basis = np.column_stack([np.ones_like(x), np.cos(w * x), np.sin(w * x)])
        coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
        resid = y - basis @ coef
        return coef, float(resid @ resid)

    best = None
    for f in freq_hint * np.linspace(0.95, 1.05, 41):
        coef, sse = linear_fit(f)
        if best is None or sse < best[2]:
            best = (f, coef, sse)
    f0, (c0, a0, b0), _ = best

    def residual(p):
        off, a, b, f = p
        w = 2.0 * math.pi * f
        return y - (off + a * np.cos(w * x) + b * np.sin(w * x))

    def jac(p):
        _, a, b, f = p
        w = 2.0 * math.pi * f
        cw, sw = np.cos(w * x), np.sin(w * x)
        return np.column_stack(
            [
                -np.ones_like(x),
                -cw,
                -sw,
                2.0 * math.pi * x * (a * sw - b * cw),
            ]
        )

    res = levenberg_marquardt(residual, jac, np.array([c0, a0, b0, f0]))
    off, a, b, f = res.x
    amplitude = math.hypot(a, b)
    phase = math.atan2(-b, a)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    r = residual(res.x)
    rms = math.sqrt(float(r @ r) / len(r))

    cov_ab = _covariance(jac(res.x), r)
    cov = None
    if cov_ab is not None and amplitude > 0:
        # delta method onto (offset, amplitude, phase, frequency)
        T = np.zeros((4, 4))
        T[0, 0] = 1.0
        T[1, 1] = a / amplitude
        T[1, 2] = b / amplitude
        T[2, 1] = b / amplitude**2
        T[2, 2] = -a / amplitude**2
        T[3, 3] = 1.0
        cov = T @ cov_ab @ T.T
    return FitReport(
        parameters={
            "offset": float(off),
            "amplitude": float(amplitude),
            "phase": float(phase),
            "frequency": float(f),
        },
        residual_norm=rms,
        converged=res.converged,
        iterations=res.iterations,
        covariance=cov,
    )


# ---------------------------------------------------------------------------
# Exponential decay
# ---------------------------------------------------------------------------


def fit_exponential(x, y, with_baseline: bool = True) -> FitReport:
    """Fit y = a0 exp(-x / tau) + baseline (x in ps).

    Initialized by log-linear regression on the min-shifted data.  All-equal
    y is flagged degenerate (tau unidentifiable).  Set with_baseline=False
    to pin the baseline at zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise ValueError(f"need >= 5 points, got {len(x)}")
    if np.any(y < 0):
        raise ValueError("y must be non-negative")
    if np.ptp(y) < 1e-13 * max(1.0, float(np.abs(y).max())):
        return FitReport(
            parameters={"a0": 0.0, "tau": float("nan"), "baseline": float(y.mean())},
            residual_norm=0.0,
            converged=False,
            iterations=0,
            degenerate=True,
            message="all-equal y: tau unidentifiable",
        )

    shift = float(y.min())
    z = y - shift
    pos = z > 1e-12 * max(1.0, z.max())
    slope, intercept = np.polyfit(x[pos], np.log(z[pos]), 1)
    tau0 = -1.0 / slope if slope < 0 else float(np.ptp(x))
    a00 = math.exp(intercept)
    base0 = shift if with_baseline else 0.0

    if with_baseline:

        def residual(p):
            a0, tau, base = p
            return y - (a0 * np.exp(-x / tau) + base)

        def jac(p):
            a0, tau, _ = p
            e = np.exp(-x / tau)
            return np.column_stack([-e, -a0 * e * x / tau**2, -np.ones_like(x)])

        p0 = np.array([a00, tau0, base0])
        names = ("a0", "tau", "baseline")
    else:

        def residual(p):
            a0, tau = p
            return y - a0 * np.exp(-x / tau)

        def jac(p):
            a0, tau = p
            e = np.exp(-x / tau)
            return np.column_stack([-e, -a0 * e * x / tau**2])

        p0 = np.array([a00, tau0])
        names = ("a0", "tau")

    res = levenberg_marquardt(residual, jac, p0)
    r = residual(res.x)
    rms = math.sqrt(float(r @ r) / len(r))
    params = {name: float(v) for name, v in zip(names, res.x)}
    params.setdefault("baseline", 0.0)
    tau = params["tau"]
    return FitReport(
        parameters=params,
        residual_norm=rms,
        converged=res.converged and tau > 0,
        iterations=res.iterations,
        covariance=_covariance(jac(res.x), r),
        message="" if tau > 0 else f"nonphysical tau {tau:g}",
    )


# ---------------------------------------------------------------------------
# Power-axis calibration
# ---------------------------------------------------------------------------


def calibrate_power_axis(
    measured: Sequence[Tuple[float, float]],
    model_curve: Sequence[Tuple[float, float]],
) -> FitReport:
    """Map measured (power, counts) Rabi data onto a model (area, signal)
    curve: counts = counts_scale * M(area_per_sqrt_power * sqrt(power))
    + counts_offset, with M a cubic-spline interpolant of the model curve.
    """
    measured = np.asarray(measured, dtype=float)
    model = np.asarray(model_curve, dtype=float)
    if measured.ndim != 2 or measured.shape[0] < 6:
        raise ValueError("need >= 6 measured (power, counts) points")
    if model.ndim != 2 or model.shape[0] < 4:
        raise ValueError("need >= 4 model (area, signal) points")
    if np.any(np.diff(model[:, 0]) <= 0):
        raise ValueError("model curve areas must be strictly increasing")
    if np.any(measured[:, 0] < 0):
        raise ValueError("powers must be >= 0")

    order = np.argsort(measured[:, 0], kind="stable")
    power = measured[order, 0]
    counts = measured[order, 1]
    root_p = np.sqrt(power)

    spline = CubicSpline(model[:, 0], model[:, 1])
    dspline = spline.derivative()

    s0 = float(model[-1, 0]) / max(float(root_p.max()), 1e-12)
    span_sig = float(np.ptp(model[:, 1])) or 1.0
    c0 = float(np.ptp(counts)) / span_sig or 1.0
    d0 = float(counts.min()) - c0 * float(model[:, 1].min())

    def residual(p):
        scale, cnt, off = p
        return counts - (cnt * spline(scale * root_p) + off)

    def jac(p):
        scale, cnt, _ = p
        u = scale * root_p
        return np.column_stack(
            [
                -cnt * dspline(u) * root_p,
                -spline(u),
                -np.ones_like(root_p),
            ]
        )

    res = levenberg_marquardt(residual, jac, np.array([s0, c0, d0]))
    r = residual(res.x)
    rms = math.sqrt(float(r @ r) / len(r))
    return FitReport(
        parameters={
            "area_per_sqrt_power": float(res.x[0]),
            "counts_scale": float(res.x[1]),
            "counts_offset": float(res.x[2]),
        },
        residual_norm=rms,
        converged=res.converged,
        iterations=res.iterations,
        covariance=_covariance(jac(res.x), r),
    )
