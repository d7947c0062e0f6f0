import json

import pytest

from trion_figures.cli import main
from trion_figures.panels import PanelError, PanelSpec, render

REFERENCE_PANELS = [
    "fig_rabi.png",
    "fig_rabi_detuning.png",
    "fig_ramsey.png",
    "fig_ramsey_detuning.png",
    "fig_coherence.png",
    "fig_coherence_detuning.png",
    "fig_map_d0.png",
    "fig_map_d9p55.png",
    "fig_map_d14p5.png",
]


class TestReferencePipeline:
    def test_reference_panels_render(self, reference_runs, tmp_path):
        out = tmp_path / "panels"
        rc = main([str(d) for d in reference_runs] + ["--out", str(out)])
        assert rc == 0
        for name in REFERENCE_PANELS:
            path = out / name
            assert path.exists(), f"missing {name}"
            assert path.stat().st_size > 5000
        assert (out / "fig_zeeman.png").exists()

    def test_byte_identical_rerender(self, reference_runs, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([str(d) for d in reference_runs] + ["--out", str(a)]) == 0
        assert main([str(d) for d in reference_runs] + ["--out", str(b)]) == 0
        for name in REFERENCE_PANELS + ["fig_zeeman.png"]:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_decay_panel_annotates_fit(self, reference_runs, tmp_path):
        coherence = [d for d in reference_runs if d.name == "coherence_d0"]
        fits = json.loads((coherence[0] / "fits.json").read_text())
        assert fits["decay_with_baseline"]["parameters"]["tau"] > 0
        spec = PanelSpec(
            kind="decay", inputs=coherence, output=tmp_path / "decay.png"
        )
        assert render(spec).exists()


class TestValidation:
    @staticmethod
    def fake_run(tmp_path, columns, experiment="rabi"):
        run = tmp_path / "run"
        run.mkdir()
        (run / "values.csv").write_text(
            ",".join(columns) + "\n" + ",".join("1" for _ in columns) + "\n"
        )
        (run / "manifest.json").write_text(
            json.dumps(
                {
                    "experiment": experiment,
                    "config": {"sequence": {"detuning_ghz": 0.0}},
                }
            )
        )
        return run

    def test_column_mismatch_names_expected_and_found(self, tmp_path):
        run = self.fake_run(tmp_path, ["area", "counts"])
        spec = PanelSpec(kind="line", inputs=[run], output=tmp_path / "x.png")
        with pytest.raises(PanelError) as err:
            render(spec)
        msg = str(err.value)
        assert "area_pi" in msg and "signal" in msg
        assert "area" in msg and "counts" in msg

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(PanelError, match="kind"):
            PanelSpec(kind="scatter3d", inputs=[tmp_path], output=tmp_path / "x.png")

    def test_unknown_normalization_rejected(self, tmp_path):
        with pytest.raises(PanelError, match="normalization"):
            PanelSpec(
                kind="line",
                inputs=[tmp_path],
                output=tmp_path / "x.png",
                normalization="zscore",
            )

    def test_missing_values_csv(self, tmp_path):
        run = tmp_path / "empty"
        run.mkdir()
        (run / "manifest.json").write_text(json.dumps({"experiment": "rabi"}))
        with pytest.raises(PanelError, match="values.csv"):
            render(PanelSpec(kind="line", inputs=[run], output=tmp_path / "x.png"))

    def test_cli_unknown_experiment_errors(self, tmp_path, capsys):
        run = self.fake_run(tmp_path, ["area_pi", "signal"], experiment="mystery")
        assert main([str(run), "--out", str(tmp_path / "o")]) == 2
        assert "mystery" in capsys.readouterr().err

    def test_stack_grid_mismatch_detected(self, tmp_path):
        r1 = self.fake_run(tmp_path, ["area_pi", "signal"])
        r2 = tmp_path / "run2"
        r2.mkdir()
        (r2 / "values.csv").write_text("area_pi,signal\n1,0.5\n2,0.6\n")
        (r2 / "manifest.json").write_text(
            json.dumps(
                {"experiment": "rabi", "config": {"sequence": {"detuning_ghz": 5.0}}}
            )
        )
        spec = PanelSpec(
            kind="line", inputs=[r1, r2], output=tmp_path / "stack.png"
        )
        with pytest.raises(PanelError, match="grid differs"):
            render(spec)
