"""Execute a RunConfig and persist its outputs.

Every run writes values.csv (long format, one row per grid point) and
manifest.json (full config echo plus solver statistics); coherence runs
additionally write fits.json with the extracted decay constant.  A solver
abort flushes the rows computed so far and marks the manifest partial.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import RunConfig, config_dict
from .experiments import (
    SweepResult,
    coherence_scan,
    control_map,
    rabi_sweep,
    ramsey_fine_scan,
)
from .fitting import FitReport, fit_exponential, fit_sinusoid
from .lindblad import IntegrationError
from .system import ZEEMAN_BRANCHES, zeeman_lines

CSV_FLOAT_FORMAT = ".17g"


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), CSV_FLOAT_FORMAT)


def write_csv(path: Path, header, rows) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
            n += 1
    return n


def _report_dict(report: FitReport) -> dict:
    out = {
        "parameters": report.parameters,
        "residual_norm": report.residual_norm,
        "converged": report.converged,
        "iterations": report.iterations,
        "degenerate": report.degenerate,
        "message": report.message,
    }
    if report.covariance is not None:
        out["covariance"] = np.asarray(report.covariance).tolist()
    return out


def _grid(start: float, stop: float, num: int) -> np.ndarray:
    return np.linspace(start, stop, num)


def _sweep_columns(experiment: str):
    return {
        "rabi": ("area_pi", "signal"),
        "ramsey": ("fine_delay_fs", "signal"),
        "coherence": ("coarse_delay_ps", "amplitude"),
        "map": ("area_pi", "fine_delay_fs", "signal"),
    }[experiment]


def execute(config: RunConfig):
    """Run the configured experiment; returns (SweepResult | zeeman rows, fits)."""
    g = config.grids
    seq = config.sequence
    sys_params = config.system
    tol = config.solver.tol
    fits = {}

    if config.experiment == "rabi":
        result = rabi_sweep(
            sys_params,
            _grid(g.area_start_pi, g.area_stop_pi, g.area_points),
            detuning=seq.detuning_ghz,
            fwhm_ps=seq.fwhm_ps,
            tol=tol,
        )
    elif config.experiment == "ramsey":
        result = ramsey_fine_scan(
            sys_params,
            seq.coarse_delay_ps,
            _grid(g.fine_start_fs, g.fine_stop_fs, g.fine_points),
            area_pi=seq.area_pi,
            detuning=seq.detuning_ghz,
            fwhm_ps=seq.fwhm_ps,
            tol=tol,
        )
    elif config.experiment == "coherence":
        result = coherence_scan(
            sys_params,
            _grid(g.coarse_start_ps, g.coarse_stop_ps, g.coarse_points),
            _grid(g.fine_start_fs, g.fine_stop_fs, g.fine_points),
            area_pi=seq.area_pi,
            detuning=seq.detuning_ghz,
            fwhm_ps=seq.fwhm_ps,
            tol=tol,
        )
        x = result.axes["coarse_delay_ps"]
        fits = {
            "decay_with_baseline": _report_dict(fit_exponential(x, result.values)),
            "decay_without_baseline": _report_dict(
                fit_exponential(x, result.values, with_baseline=False)
            ),
        }
    elif config.experiment == "map":
        result = control_map(
            sys_params,
            _grid(0.0, g.map_area_stop_pi, g.map_points),
            _grid(g.fine_start_fs, g.fine_stop_fs, g.map_points),
            coarse_delay_ps=seq.coarse_delay_ps,
            detuning=seq.detuning_ghz,
            fwhm_ps=seq.fwhm_ps,
            tol=tol,
        )
    elif config.experiment == "zeeman":
        fields = _grid(g.b_min, g.b_max, g.b_points)
        rows = []
        for b in fields:
            energies = zeeman_lines(config.magneto, float(b))
            for branch, e in zip(ZEEMAN_BRANCHES, energies):
                rows.append((b, branch, e))
        return rows, fits
    else:
        raise ValueError(f"unknown experiment {config.experiment!r}")
    return result, fits


def run(config: RunConfig, out_dir=None) -> int:
    """Execute and write outputs; returns the process exit status."""
    out = Path(out_dir or config.output_dir or f"runs/{config.experiment}")
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    manifest = {
        "experiment": config.experiment,
        "config": config_dict(config),
        "kappa": config.system.phonon_scale,
        "partial": False,
    }

    try:
        result, fits = execute(config)
    except IntegrationError as exc:
        manifest["partial"] = True
        manifest["error"] = str(exc)
        manifest["wall_time_s"] = round(time.perf_counter() - started, 3)
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        print(f"solver abort: {exc}")
        return 1

    if config.experiment == "zeeman":
        n = write_csv(out / "values.csv", ("b_tesla", "line", "energy_uev"), result)
        manifest["magneto"] = asdict(config.magneto)
    else:
        header = _sweep_columns(config.experiment)
        n = write_csv(out / "values.csv", header, result.rows())
        manifest["sweep"] = {
            k: v
            for k, v in result.manifest.items()
            if k not in ("system", "sequence")
        }
        manifest["system"] = result.manifest["system"]
        manifest["sequence"] = result.manifest["sequence"]

    manifest["rows"] = n
    manifest["wall_time_s"] = round(time.perf_counter() - started, 3)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    if fits:
        with open(out / "fits.json", "w") as fh:
            json.dump(fits, fh, indent=2, sort_keys=True)
    print(f"wrote {n} rows to {out / 'values.csv'}")
    return 0


def refit(run_dir, measured_csv=None) -> int:
    """Fit an existing run directory (the `fit` subcommand).

    ramsey: fringe sinusoid; coherence: decay constant (with and without
    baseline); rabi with --measured power,counts data: power-axis
    calibration.  Writes fits.json next to values.csv.
    """
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    experiment = manifest["experiment"]
    data = np.genfromtxt(run_dir / "values.csv", delimiter=",", names=True)

    fits = {}
    if experiment == "ramsey":
        hint = manifest.get("sweep", {}).get("laser_frequency_ghz")
        if hint is None:
            from .system import SystemParams, laser_frequency

            cfg = manifest.get("config", {})
            sys_cfg = {
                k: v
                for k, v in cfg.get("system", {}).items()
                if k in ("delta_e_gs", "delta_e_tr", "omega0")
            }
            hint = laser_frequency(
                SystemParams(**sys_cfg),
                cfg.get("sequence", {}).get("detuning_ghz", 0.0),
            )
        fits["fringe"] = _report_dict(
            fit_sinusoid(data["fine_delay_fs"], data["signal"], hint * 1e-6)
        )
    elif experiment == "coherence":
        x, y = data["coarse_delay_ps"], data["amplitude"]
        fits["decay_with_baseline"] = _report_dict(fit_exponential(x, y))
        fits["decay_without_baseline"] = _report_dict(
            fit_exponential(x, y, with_baseline=False)
        )
    elif experiment == "rabi":
        if measured_csv is None:
            print("rabi fit needs --measured CSV with power,counts columns")
            return 2
        from .fitting import calibrate_power_axis

        meas = np.genfromtxt(measured_csv, delimiter=",", names=True)
        measured = np.column_stack([meas["power"], meas["counts"]])
        model = np.column_stack([data["area_pi"], data["signal"]])
        fits["power_calibration"] = _report_dict(
            calibrate_power_axis(measured, model)
        )
    else:
        print(f"no fit defined for experiment {experiment!r}")
        return 2

    with open(run_dir / "fits.json", "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True)
    for name, rep in fits.items():
        print(f"{name}: {rep['parameters']}")
    return 0
