import numpy as np
import pytest

from trion_dynamics.experiments import (
    SweepResult,
    coherence_scan,
    control_map,
    count_row_maxima,
    low_area_row_maxima,
    rabi_sweep,
    ramsey_fine_scan,
    readout_time_ps,
    signal,
    simulate_sequence,
)
from trion_dynamics.fitting import fit_sinusoid
from trion_dynamics.operators import s
from trion_dynamics.system import PulseSequence, SystemParams, laser_frequency

NO_DISSIPATION = dict(gamma_spont=0, gamma_pump=0, gamma_deph=0, alpha_phonon=0)


class TestSignal:
    def test_no_drive_no_pump_is_zero(self):
        p = SystemParams(gamma_pump=0.0)
        seq = PulseSequence.single(0.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-3)
        assert signal(traj, seq) == pytest.approx(0.0, abs=1e-12)

    def test_ideal_pi_pulse_from_pure_spin_down(self):
        p = SystemParams(**NO_DISSIPATION)
        seq = PulseSequence.single(1.0)
        traj = simulate_sequence(p, seq, initial=s(2, 2), sample_dt_ns=1e-3)
        assert signal(traj, seq) == pytest.approx(1.0, abs=1e-4)

    def test_pi_pulse_from_default_initial_state_gives_half(self):
        p = SystemParams(**NO_DISSIPATION)
        seq = PulseSequence.single(1.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-3)
        assert signal(traj, seq) == pytest.approx(0.5, abs=1e-4)

    def test_integrated_emission_mode(self):
        p = SystemParams()
        seq = PulseSequence.single(1.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-4)
        em = signal(traj, seq, mode="integrated-emission", params=p)
        assert 0.0 < em < 1.0

    def test_uncovered_t1_raises(self):
        p = SystemParams()
        seq = PulseSequence.double(0.5, 80.0, 0.0)
        short = PulseSequence.single(0.5)
        traj = simulate_sequence(p, short, compiled=True, sample_dt_ns=1e-3)
        with pytest.raises(ValueError, match="cover"):
            signal(traj, seq)

    def test_readout_rule(self):
        dual = PulseSequence.double(0.5, 80.0, 4.0)
        assert readout_time_ps(dual) == pytest.approx(80.0 + 4e-3 + 23.0)
        single = PulseSequence.single(0.5)
        assert readout_time_ps(single) == pytest.approx(3.2 * 23.0)


class TestSweepResult:
    def test_shape_contract(self):
        with pytest.raises(ValueError, match="shape"):
            SweepResult(
                axes={"a": np.arange(3.0)},
                values=np.zeros(4),
                manifest={"signal_mode": "population"},
            )

    def test_population_range_enforced(self):
        with pytest.raises(ValueError, match="population"):
            SweepResult(
                axes={"a": np.arange(3.0)},
                values=np.array([0.0, 0.5, 1.5]),
                manifest={"signal_mode": "population"},
            )

    def test_rows_long_format(self):
        r = SweepResult(
            axes={"a": np.array([0.0, 1.0]), "b": np.array([10.0, 20.0, 30.0])},
            values=np.arange(6.0).reshape(2, 3) / 10.0,
            manifest={"signal_mode": "population"},
        )
        rows = list(r.rows())
        assert len(rows) == 6
        assert rows[0] == (0.0, 10.0, 0.0)
        assert rows[4] == (1.0, 20.0, 0.4)


class TestRabiSweep:
    def test_zero_area_equals_no_drive_baseline(self):
        p = SystemParams()
        res = rabi_sweep(p, [0.0, 0.5, 1.0])
        baseline = res.values[0]
        seq = PulseSequence.single(0.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-3)
        assert baseline == pytest.approx(signal(traj, seq), abs=1e-9)

    def test_dissipation_free_maxima_positions_and_value(self):
        p = SystemParams(**NO_DISSIPATION)
        areas = np.linspace(0.0, 3.5, 57)
        res = rabi_sweep(p, areas)
        sig = res.values
        i1 = np.argmax(sig[: len(sig) // 2])
        i3 = len(sig) // 2 + np.argmax(sig[len(sig) // 2 :])
        step = areas[1] - areas[0]
        assert abs(areas[i1] - 1.0) <= step
        assert abs(areas[i3] - 3.0) <= step
        assert sig[i1] == pytest.approx(0.5, abs=1e-3)

    def test_manifest_records_kappa_and_detuning(self):
        p = SystemParams()
        res = rabi_sweep(p, [0.0, 1.0], detuning=5.0)
        assert res.manifest["kappa"] == p.phonon_scale
        assert res.manifest["detuning_ghz"] == 5.0
        assert res.manifest["experiment"] == "rabi"


class TestRamsey:
    def test_fringe_period_matches_laser_frequency(self):
        p = SystemParams()
        fines = np.linspace(0.0, 11.0, 61)
        res = ramsey_fine_scan(p, 80.0, fines, detuning=14.5)
        hint = laser_frequency(p, 14.5) * 1e-6
        rep = fit_sinusoid(fines, res.values, hint)
        assert rep.converged
        assert rep.parameters["frequency"] == pytest.approx(hint, rel=1e-3)

    def test_coincident_half_pulses_act_as_pi_pulse(self):
        p = SystemParams(**NO_DISSIPATION)
        seq = PulseSequence.double(0.5, 0.0, 0.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-3)
        assert signal(traj, seq) == pytest.approx(0.5, abs=1e-3)

    def test_ramsey_symmetry_extremes(self):
        # on resonance, no dissipation: fringe max equals the single-pi
        # level and fringe min the no-pulse baseline, within 1e-3
        p = SystemParams(**NO_DISSIPATION)
        fines = np.linspace(0.0, 11.0, 45)
        res = ramsey_fine_scan(p, 80.0, fines, detuning=0.0)
        hint = laser_frequency(p, 0.0) * 1e-6
        rep = fit_sinusoid(fines, res.values, hint)
        top = rep.parameters["offset"] + rep.parameters["amplitude"]
        bottom = rep.parameters["offset"] - rep.parameters["amplitude"]
        pi_seq = PulseSequence.single(1.0)
        pi_level = signal(
            simulate_sequence(p, pi_seq, compiled=True, sample_dt_ns=1e-3), pi_seq
        )
        assert top == pytest.approx(pi_level, abs=1e-3)
        assert bottom == pytest.approx(0.0, abs=1e-3)


class TestCoherenceScan:
    def test_flat_without_decoherence(self):
        p = SystemParams(**NO_DISSIPATION)
        res = coherence_scan(
            p, [80.0, 110.0, 140.0], np.linspace(0.0, 11.0, 31), detuning=0.0
        )
        amps = res.values
        assert np.ptp(amps) / amps.mean() < 1e-3
        assert res.value_label == "amplitude"

    def test_amplitude_decays_with_delay(self):
        p = SystemParams()
        res = coherence_scan(p, [80.0, 130.0, 180.0], np.linspace(0.0, 11.0, 31))
        assert res.values[0] > res.values[1] > res.values[2] > 0


class TestControlMap:
    def test_zero_area_row_is_flat_baseline(self):
        # readout times differ by a few fs along the row, so the pump-fed
        # baseline varies only at the 1e-7 level
        p = SystemParams()
        res = control_map(p, [0.0, 0.5], np.linspace(0.0, 6.0, 9))
        row = res.values[0]
        assert np.ptp(row) < 1e-5
        seq = PulseSequence.double(0.0, 80.0, 0.0)
        traj = simulate_sequence(p, seq, compiled=True, sample_dt_ns=1e-3)
        assert row[0] == pytest.approx(signal(traj, seq), abs=1e-6)
        assert res.values.shape == (2, 9)

    def test_fringe_count_helpers(self):
        # cos over [0, 6 pi]: interior maxima at 2 pi and 4 pi
        y = np.cos(np.linspace(0, 6 * np.pi, 200))
        assert count_row_maxima(y, prominence=0.5) == 2
        grid = SweepResult(
            axes={"area_pi": np.array([0.0, 0.5]), "fine_delay_fs": np.linspace(0, 10, 50)},
            values=np.vstack(
                [np.zeros(50), 0.25 + 0.2 * np.cos(np.linspace(0, 6 * np.pi, 50))]
            ),
            manifest={"signal_mode": "population"},
        )
        assert low_area_row_maxima(grid) == 2


class TestDeterminism:
    def test_serial_and_concurrent_grids_identical(self, monkeypatch):
        p = SystemParams()
        coarses = [80.0, 90.0, 100.0, 110.0]
        fines = np.linspace(0.0, 11.0, 15)
        monkeypatch.setenv("TRION_THREADS", "1")
        serial = coherence_scan(p, coarses, fines)
        monkeypatch.setenv("TRION_THREADS", "2")
        parallel = coherence_scan(p, coarses, fines)
        assert np.array_equal(serial.values, parallel.values)

    def test_repeat_run_bit_identical(self):
        p = SystemParams()
        a = rabi_sweep(p, np.linspace(0, 2, 21), detuning=3.3)
        b = rabi_sweep(p, np.linspace(0, 2, 21), detuning=3.3)
        assert np.array_equal(a.values, b.values)
