"""render_figures: batch panel rendering for completed run directories.

Usage: render_figures RUN_DIR [RUN_DIR ...] --out DIR

Runs are classified by the experiment recorded in each manifest.  Single
runs produce their panel directly; several rabi/ramsey/coherence runs at
different detunings additionally produce the stacked detuning panels.
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict
from pathlib import Path

from .panels import PanelError, PanelSpec, load_manifest, render, run_detuning


def build_specs(run_dirs, out_dir: Path):
    groups = defaultdict(list)
    for rd in run_dirs:
        experiment = load_manifest(rd)["experiment"]
        groups[experiment].append(Path(rd))

    specs = []
    kind_of = {"rabi": "line", "ramsey": "fringe", "coherence": "decay"}
    stack_name = {
        "rabi": "fig_rabi_detuning.png",
        "ramsey": "fig_ramsey_detuning.png",
        "coherence": "fig_coherence_detuning.png",
    }
    title = {
        "rabi": "Rabi oscillations",
        "ramsey": "Ramsey interference",
        "coherence": "Ramsey fringe decay",
    }

    for experiment in ("rabi", "ramsey", "coherence"):
        runs = sorted(groups.get(experiment, []), key=run_detuning)
        if not runs:
            continue
        base = min(runs, key=lambda r: abs(run_detuning(r)))
        specs.append(
            PanelSpec(
                kind=kind_of[experiment],
                inputs=[base],
                output=out_dir / f"fig_{experiment}.png",
                title=f"{title[experiment]}, "
                rf"$\Delta\omega_L/2\pi$ = {run_detuning(base):g} GHz",
            )
        )
        if len(runs) > 1:
            specs.append(
                PanelSpec(
                    kind=kind_of[experiment],
                    inputs=runs,
                    output=out_dir / stack_name[experiment],
                    normalization="minmax" if experiment == "rabi" else "none",
                )
            )

    for rd in sorted(groups.get("map", []), key=run_detuning):
        detuning = run_detuning(rd)
        tag = f"{detuning:g}".replace(".", "p").replace("-", "m")
        specs.append(
            PanelSpec(
                kind="heatmap",
                inputs=[rd],
                output=out_dir / f"fig_map_d{tag}.png",
                normalization="minmax",
            )
        )

    for rd in groups.get("zeeman", []):
        specs.append(
            PanelSpec(kind="zeeman", inputs=[rd], output=out_dir / "fig_zeeman.png")
        )

    unknown = set(groups) - {"rabi", "ramsey", "coherence", "map", "zeeman"}
    if unknown:
        raise PanelError(f"no panel defined for experiments {sorted(unknown)}")
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render publication-style panels from run directories.",
    )
    parser.add_argument("run_dirs", nargs="+", type=Path, metavar="RUN_DIR")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)

    try:
        specs = build_specs(args.run_dirs, args.out)
        if not specs:
            print("no renderable runs found", file=sys.stderr)
            return 2
        for spec in specs:
            path = render(spec)
            print(f"wrote {path}")
    except PanelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
