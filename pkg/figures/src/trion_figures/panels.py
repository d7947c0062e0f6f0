"""Panel rendering from run-directory CSV/JSON files.

Every panel is a pure function of its input files: fixed figure size,
fonts, colormap and no timestamps, so re-rendering a run directory yields
byte-identical images (given a pinned matplotlib).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

RC = {
    "figure.figsize": (4.6, 3.2),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9.5,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.3,
    "axes.linewidth": 0.8,
    "svg.hashsalt": "trion-figures",
}

CMAP = "viridis"

EXPECTED_COLUMNS = {
    "line": ["area_pi", "signal"],
    "fringe": ["fine_delay_fs", "signal"],
    "decay": ["coarse_delay_ps", "amplitude"],
    "heatmap": ["area_pi", "fine_delay_fs", "signal"],
    "zeeman": ["b_tesla", "line", "energy_uev"],
}

PNG_METADATA = {"Software": "trion-figures"}


class PanelError(ValueError):
    pass


@dataclass
class PanelSpec:
    """One output panel: what to draw, from which run directories.

    kinds "line", "fringe" and "decay" accept multiple inputs; the runs
    are then stacked into a detuning-resolved panel, ordered by the sorted
    detuning read from each manifest.
    """

    kind: str
    inputs: List[Path]
    output: Path
    title: str = ""
    normalization: str = "none"  # "none" or "minmax"
    annotate: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPECTED_COLUMNS:
            raise PanelError(
                f"unknown panel kind {self.kind!r}; choose from "
                f"{sorted(EXPECTED_COLUMNS)}"
            )
        if self.normalization not in ("none", "minmax"):
            raise PanelError(f"unknown normalization {self.normalization!r}")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def load_run(run_dir: Path, kind: str) -> pd.DataFrame:
    values = Path(run_dir) / "values.csv"
    if not values.exists():
        raise PanelError(f"no values.csv in {run_dir}")
    df = pd.read_csv(values)
    expected = EXPECTED_COLUMNS[kind]
    if list(df.columns) != expected:
        raise PanelError(
            f"{values}: expected columns {expected}, found {list(df.columns)}"
        )
    return df


def load_manifest(run_dir: Path) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise PanelError(f"no manifest.json in {run_dir}")
    return json.loads(path.read_text())


def run_detuning(run_dir: Path) -> float:
    man = load_manifest(run_dir)
    if "sweep" in man and "detuning_ghz" in man.get("sweep", {}):
        return float(man["sweep"]["detuning_ghz"])
    return float(man.get("config", {}).get("sequence", {}).get("detuning_ghz", 0.0))


def _normalize(values: np.ndarray, mode: str) -> np.ndarray:
    if mode == "minmax":
        lo, hi = float(values.min()), float(values.max())
        if hi > lo:
            return (values - lo) / (hi - lo)
        return values - lo
    return values


def _save(fig, spec: PanelSpec) -> Path:
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return spec.output


def _signal_label(spec: PanelSpec) -> str:
    return "Signal (norm.)" if spec.normalization == "minmax" else "Signal"


def render(spec: PanelSpec) -> Path:
    """Render one panel to spec.output; returns the written path."""
    with plt.rc_context(RC):
        if spec.kind == "line":
            return _render_line(spec)
        if spec.kind == "fringe":
            return _render_fringe(spec)
        if spec.kind == "decay":
            return _render_decay(spec)
        if spec.kind == "heatmap":
            return _render_heatmap(spec)
        return _render_zeeman(spec)


def _render_line(spec: PanelSpec) -> Path:
    if len(spec.inputs) == 1:
        df = load_run(spec.inputs[0], "line")
        fig, ax = plt.subplots()
        y = _normalize(df["signal"].to_numpy(), spec.normalization)
        ax.plot(df["area_pi"], y, color="crimson")
        ax.set_xlabel(r"Pulse area ($\pi$)")
        ax.set_ylabel(_signal_label(spec))
        ax.set_title(spec.title or "Rabi oscillations")
        fig.tight_layout()
        return _save(fig, spec)
    return _render_detuning_stack(spec, "line", "area_pi", r"Pulse area ($\pi$)")


def _render_fringe(spec: PanelSpec) -> Path:
    if len(spec.inputs) == 1:
        df = load_run(spec.inputs[0], "fringe")
        fig, ax = plt.subplots()
        y = _normalize(df["signal"].to_numpy(), spec.normalization)
        ax.plot(df["fine_delay_fs"], y, color="navy", marker="o", markersize=2.2)
        ax.set_xlabel("Fine delay (fs)")
        ax.set_ylabel(_signal_label(spec))
        ax.set_title(spec.title or "Ramsey interference")
        fig.tight_layout()
        return _save(fig, spec)
    return _render_detuning_stack(spec, "fringe", "fine_delay_fs", "Fine delay (fs)")


def _render_detuning_stack(spec: PanelSpec, kind: str, xcol: str, xlabel: str) -> Path:
    """2-D detuning panel from several single-detuning runs (sorted)."""
    runs = sorted(spec.inputs, key=run_detuning)
    detunings = [run_detuning(r) for r in runs]
    frames = [load_run(r, kind) for r in runs]
    x = frames[0][xcol].to_numpy()
    for r, f in zip(runs, frames):
        if len(f) != len(x) or not np.allclose(f[xcol].to_numpy(), x):
            raise PanelError(f"{r}: {xcol} grid differs between stacked runs")
    grid = np.vstack([f["signal"].to_numpy() for f in frames])
    grid = _normalize(grid, spec.normalization)
    fig, ax = plt.subplots()
    mesh = ax.pcolormesh(x, detunings, grid, cmap=CMAP, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=_signal_label(spec))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(r"Detuning $\Delta\omega_L/2\pi$ (GHz)")
    ax.set_title(spec.title or "Detuning dependence")
    fig.tight_layout()
    return _save(fig, spec)


def _render_decay(spec: PanelSpec) -> Path:
    fig, ax = plt.subplots()
    if len(spec.inputs) == 1:
        run = spec.inputs[0]
        df = load_run(run, "decay")
        ax.plot(
            df["coarse_delay_ps"],
            df["amplitude"],
            "o",
            color="k",
            markersize=3.5,
            label="fringe amplitude",
        )
        fits = Path(run) / "fits.json"
        if fits.exists():
            rep = json.loads(fits.read_text()).get("decay_with_baseline")
            if rep:
                p = rep["parameters"]
                x = np.linspace(
                    df["coarse_delay_ps"].min(), df["coarse_delay_ps"].max(), 300
                )
                ax.plot(
                    x,
                    p["a0"] * np.exp(-x / p["tau"]) + p["baseline"],
                    color="crimson",
                    label=rf"fit, $T_2^*$ = {p['tau']:.1f} ps",
                )
        ax.legend(frameon=False)
        ax.set_title(spec.title or "Ramsey fringe decay")
    else:
        for run in sorted(spec.inputs, key=run_detuning):
            df = load_run(run, "decay")
            ax.plot(
                df["coarse_delay_ps"],
                df["amplitude"],
                marker="o",
                markersize=2.5,
                label=f"{run_detuning(run):g} GHz",
            )
        ax.legend(frameon=False, title="detuning")
        ax.set_title(spec.title or "Fringe decay vs detuning")
    ax.set_xlabel("Coarse delay (ps)")
    ax.set_ylabel("Fringe amplitude")
    fig.tight_layout()
    return _save(fig, spec)


def _render_heatmap(spec: PanelSpec) -> Path:
    if len(spec.inputs) != 1:
        raise PanelError("heatmap takes exactly one run directory")
    df = load_run(spec.inputs[0], "heatmap")
    areas = np.unique(df["area_pi"].to_numpy())
    fines = np.unique(df["fine_delay_fs"].to_numpy())
    grid = df["signal"].to_numpy().reshape(len(areas), len(fines))
    grid = _normalize(grid, spec.normalization)
    fig, ax = plt.subplots()
    # delay on x, pulse area (power axis) on y
    mesh = ax.pcolormesh(fines, areas, grid, cmap=CMAP, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=_signal_label(spec))
    ax.set_xlabel("Fine delay (fs)")
    ax.set_ylabel(r"Pulse area ($\pi$)")
    title = spec.title
    if not title:
        title = rf"Coherent control, $\Delta\omega_L/2\pi$ = {run_detuning(spec.inputs[0]):g} GHz"
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, spec)


def _render_zeeman(spec: PanelSpec) -> Path:
    if len(spec.inputs) != 1:
        raise PanelError("zeeman takes exactly one run directory")
    df = load_run(spec.inputs[0], "zeeman")
    fig, ax = plt.subplots()
    colors = {
        "outer_low": "tab:blue",
        "inner_low": "tab:orange",
        "inner_high": "tab:orange",
        "outer_high": "tab:blue",
    }
    for branch, sub in df.groupby("line", sort=True):
        sub = sub.sort_values("b_tesla")
        ax.plot(
            sub["b_tesla"],
            sub["energy_uev"] * 1e-3,
            color=colors.get(branch, "k"),
            label=branch,
        )
    ax.set_xlabel("Magnetic field (T)")
    ax.set_ylabel("Transition energy (meV)")
    ax.set_title(spec.title or "Zeeman line positions")
    ax.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    return _save(fig, spec)
