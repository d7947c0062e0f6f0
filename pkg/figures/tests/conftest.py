import subprocess
import sys

import pytest

FAST = [
    "--set", "grids.area_points=13",
    "--set", "grids.area_stop_pi=4.25",
    "--set", "grids.fine_points=15",
    "--set", "grids.coarse_points=5",
    "--set", "grids.coarse_stop_ps=120",
    "--set", "grids.map_points=9",
    "--set", "grids.b_points=11",
]


def run_primary(args):
    proc = subprocess.run(
        [sys.executable, "-m", "trion_dynamics.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr + proc.stdout
    return proc


@pytest.fixture(scope="session")
def reference_runs(tmp_path_factory):
    """Compact-grid reference run set built through the primary CLI."""
    root = tmp_path_factory.mktemp("reference_runs")
    dirs = []
    for d in (0.0, 10.0, 20.0):
        out = root / f"rabi_d{d:g}"
        run_primary(["rabi", "--out", str(out), "--detuning", str(d)] + FAST)
        dirs.append(out)
    for d in (0.0, 5.0, 10.0, 15.0):
        out = root / f"ramsey_d{d:g}"
        run_primary(["ramsey", "--out", str(out), "--detuning", str(d)] + FAST)
        dirs.append(out)
    for d in (0.0, 10.0):
        out = root / f"coherence_d{d:g}"
        run_primary(["coherence", "--out", str(out), "--detuning", str(d)] + FAST)
        dirs.append(out)
    for d in (0.0, 9.55, 14.5):
        out = root / f"map_d{d:g}"
        run_primary(["map", "--out", str(out), "--detuning", str(d)] + FAST)
        dirs.append(out)
    out = root / "zeeman"
    run_primary(["zeeman", "--out", str(out)] + FAST)
    dirs.append(out)
    return dirs
