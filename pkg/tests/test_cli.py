import csv
import json
from pathlib import Path

import numpy as np
import pytest

from trion_dynamics.cli import main

FAST = [
    "--set", "grids.area_points=9",
    "--set", "grids.area_stop_pi=2.0",
    "--set", "grids.fine_points=15",
    "--set", "grids.coarse_points=5",
    "--set", "grids.coarse_stop_ps=120",
    "--set", "grids.map_points=7",
    "--set", "grids.b_points=11",
]


def read_csv(path: Path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


class TestRuns:
    def test_rabi_csv_contract(self, tmp_path):
        assert main(["rabi", "--out", str(tmp_path)] + FAST) == 0
        header, rows = read_csv(tmp_path / "values.csv")
        assert header == ["area_pi", "signal"]
        assert len(rows) == 9
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["experiment"] == "rabi"
        assert manifest["partial"] is False
        assert manifest["kappa"] == manifest["config"]["system"]["phonon_scale"]

    def test_ramsey_csv_contract(self, tmp_path):
        assert main(["ramsey", "--out", str(tmp_path)] + FAST) == 0
        header, rows = read_csv(tmp_path / "values.csv")
        assert header == ["fine_delay_fs", "signal"]
        assert len(rows) == 15

    def test_map_csv_contract(self, tmp_path):
        assert main(["map", "--out", str(tmp_path)] + FAST) == 0
        header, rows = read_csv(tmp_path / "values.csv")
        assert header == ["area_pi", "fine_delay_fs", "signal"]
        assert len(rows) == 49

    def test_coherence_writes_fits(self, tmp_path):
        assert main(["coherence", "--out", str(tmp_path)] + FAST) == 0
        header, rows = read_csv(tmp_path / "values.csv")
        assert header == ["coarse_delay_ps", "amplitude"]
        assert len(rows) == 5
        fits = json.loads((tmp_path / "fits.json").read_text())
        assert "decay_with_baseline" in fits
        assert "decay_without_baseline" in fits
        assert fits["decay_with_baseline"]["parameters"]["tau"] > 0

    def test_zeeman_csv(self, tmp_path):
        assert main(["zeeman", "--out", str(tmp_path), "--set", "b_max=5"] + FAST) == 0
        header, rows = read_csv(tmp_path / "values.csv")
        assert header == ["b_tesla", "line", "energy_uev"]
        assert len(rows) == 44  # 11 fields x 4 lines
        branches = {r[1] for r in rows}
        assert branches == {"outer_low", "inner_low", "inner_high", "outer_high"}

    def test_detuning_flag(self, tmp_path):
        assert main(["rabi", "--out", str(tmp_path), "--detuning", "14.5"] + FAST) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["sequence"]["detuning_ghz"] == 14.5


class TestReproducibility:
    def test_rerun_from_manifest_is_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["ramsey", "--out", str(a)] + FAST) == 0
        assert main(["ramsey", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
        assert (a / "values.csv").read_text() == (b / "values.csv").read_text()

    def test_csv_numbers_are_plain_decimal(self, tmp_path):
        assert main(["rabi", "--out", str(tmp_path)] + FAST) == 0
        _, rows = read_csv(tmp_path / "values.csv")
        for row in rows:
            for cell in row:
                float(cell)  # parseable
                assert "," not in cell


class TestErrors:
    def test_usage_error_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_config_key_exit_2(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"system": {"nope": 1}}')
        assert main(["rabi", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_fit_without_manifest_exit_2(self, tmp_path):
        assert main(["fit", str(tmp_path)]) == 2


class TestFitSubcommand:
    def test_fit_coherence_run(self, tmp_path):
        assert main(["coherence", "--out", str(tmp_path)] + FAST) == 0
        (tmp_path / "fits.json").unlink()
        assert main(["fit", str(tmp_path)]) == 0
        fits = json.loads((tmp_path / "fits.json").read_text())
        assert fits["decay_with_baseline"]["parameters"]["tau"] > 0

    def test_fit_ramsey_run(self, tmp_path):
        assert main(["ramsey", "--out", str(tmp_path)] + FAST) == 0
        assert main(["fit", str(tmp_path)]) == 0
        fits = json.loads((tmp_path / "fits.json").read_text())
        freq = fits["fringe"]["parameters"]["frequency"]
        assert freq == pytest.approx(0.332940, rel=1e-3)

    def test_fit_rabi_with_measured(self, tmp_path):
        assert main(["rabi", "--out", str(tmp_path),
                     "--set", "grids.area_points=41",
                     "--set", "grids.area_stop_pi=2.0"]) == 0
        data = np.genfromtxt(tmp_path / "values.csv", delimiter=",", names=True)
        powers = (data["area_pi"][1:] / 0.8) ** 2
        counts = 500.0 * data["signal"][1:] + 20.0
        measured = tmp_path / "measured.csv"
        with open(measured, "w") as fh:
            fh.write("power,counts\n")
            for pw, ct in zip(powers, counts):
                fh.write(f"{pw},{ct}\n")
        assert main(["fit", str(tmp_path), "--measured", str(measured)]) == 0
        fits = json.loads((tmp_path / "fits.json").read_text())
        cal = fits["power_calibration"]["parameters"]
        assert cal["area_per_sqrt_power"] == pytest.approx(0.8, rel=1e-3)
        assert cal["counts_scale"] == pytest.approx(500.0, rel=1e-2)
