import json
import wave

import numpy as np
import pytest

import fdsim.cli as cli
import fdsim.harness as harness
from fdsim.fft import ConfigurationError
from fdsim.fixedpoint import DataType
from fdsim.harness import (FftRunSpec, FftSweepSpec, I2sRunSpec, I2sSweepSpec,
                           InputSpec, Report, build_fft_input, load_config,
                           ops_count, parse_config, run_fft_experiment,
                           run_fft_sweep, run_i2s_scenario, run_i2s_sweep)
from fdsim.i2s import BusConfig, BusMode


def fft_config(**over):
    fft = {"n_points": 64, "dtype": "C32",
           "input": {"source": "noise", "amplitude": 0.9}}
    fft.update(over)
    return {"version": 1, "kind": "fft-run", "seed": 7, "fft": fft}


class TestConfigParsing:
    def test_fft_run(self):
        cfg = parse_config(fft_config())
        assert cfg.kind == "fft-run"
        assert cfg.seed == 7
        assert cfg.spec.dtype is DataType.C32

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            parse_config({"version": 1, "kind": "mystery"})

    def test_bad_version(self):
        with pytest.raises(ConfigurationError):
            parse_config({"version": 2, "kind": "fft-run", "fft": {}})

    def test_missing_required(self):
        with pytest.raises(ConfigurationError):
            parse_config({"version": 1, "kind": "fft-run", "fft": {"dtype": "C64"}})

    def test_bad_input_source(self):
        with pytest.raises(ConfigurationError):
            parse_config(fft_config(input={"source": "sine"}))

    def test_i2s_run(self):
        cfg = parse_config({"version": 1, "kind": "i2s-run", "seed": 1,
                            "i2s": {"mode": "tdm-dsp", "n_devices": 4}})
        assert cfg.spec.bus.mode is BusMode.TDM_DSP

    def test_i2s_bad_mode(self):
        with pytest.raises(ConfigurationError):
            parse_config({"version": 1, "kind": "i2s-run",
                          "i2s": {"mode": "spdif"}})

    def test_load_config_missing_file(self):
        with pytest.raises(ConfigurationError):
            load_config("/nonexistent/cfg.json")

    def test_load_config_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigurationError):
            load_config(p)


class TestInputs:
    def test_impulse(self):
        x = build_fft_input(InputSpec(source="impulse", amplitude=0.5), 16, 0)
        assert x[0] == 0.5 and np.all(x[1:] == 0)

    def test_tone_bin(self):
        x = build_fft_input(InputSpec(source="tone", amplitude=0.5, bin=2), 16, 0)
        assert np.allclose(np.abs(x), 0.5)

    def test_noise_seeded(self):
        a = build_fft_input(InputSpec(), 64, 3)
        b = build_fft_input(InputSpec(), 64, 3)
        c = build_fft_input(InputSpec(), 64, 4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_wav_file(self, tmp_path):
        path = tmp_path / "in.wav"
        data = (np.arange(64, dtype=np.int16) * 256).astype("<i2")
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(48000)
            w.writeframes(data.tobytes())
        x = build_fft_input(InputSpec(source="file", path=str(path)), 64, 0)
        assert x[1] == pytest.approx(256 / 32768)

    def test_wav_too_short(self, tmp_path):
        path = tmp_path / "in.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(48000)
            w.writeframes(b"\x00\x00" * 8)
        with pytest.raises(ConfigurationError):
            build_fft_input(InputSpec(source="file", path=str(path)), 64, 0)


class TestFftReport:
    def test_checks_pass_and_metrics(self):
        spec = parse_config(fft_config()).spec
        report = run_fft_experiment(spec, seed=7)
        assert report.passed
        assert report.metrics["butterfly_cycles"] == 32 * 6 // 2
        assert report.metrics["ops"] == ops_count(64)

    def test_gops_identity(self):
        spec = parse_config(fft_config(n_points=512, dtype="C64")).spec
        report = run_fft_experiment(spec, seed=1)
        gops = report.metrics["gops"]
        total = report.metrics["total_cycles"]
        ops = report.metrics["ops"]
        clock = report.metrics["clock_hz"]
        assert abs(gops * 1e9 * total / clock - ops) <= 1e-6 * ops

    def test_byte_identical_reports(self):
        spec = parse_config(fft_config(n_points=128, dtype="C16")).spec
        a = run_fft_experiment(spec, seed=5).to_json()
        b = run_fft_experiment(spec, seed=5).to_json()
        assert a.encode() == b.encode()

    def test_seed_changes_noise_report(self):
        spec = parse_config(fft_config()).spec
        a = run_fft_experiment(spec, seed=5)
        b = run_fft_experiment(spec, seed=6)
        assert a.metrics["snr_db"] != b.metrics["snr_db"]

    def test_failing_floor_fails_report(self, monkeypatch):
        monkeypatch.setitem(harness.SNR_FLOORS_DB, DataType.C32, 1000.0)
        spec = parse_config(fft_config()).spec
        report = run_fft_experiment(spec, seed=7)
        assert not report.passed
        assert not report.checks["snr_floor"]

    def test_memory_image_dump(self, tmp_path):
        spec = FftRunSpec(n_points=64, dtype=DataType.C32,
                          dump_memory_image=True)
        run_fft_experiment(spec, seed=0, out_dir=tmp_path)
        assert (tmp_path / "memory.bin").exists()
        assert (tmp_path / "memory.bin.json").exists()


class TestSweeps:
    def test_fft_sweep_rows_and_checks(self, tmp_path):
        spec = FftSweepSpec(dtypes=(DataType.C64, DataType.C32, DataType.C16),
                            n_points=(8, 16, 32, 64))
        report, rows = run_fft_sweep(spec, seed=2, out_dir=tmp_path)
        assert report.passed
        assert len(rows) == 12
        assert rows == sorted(rows, key=lambda r: (r["dtype"], r["n_points"]))
        assert (tmp_path / "summary.csv").read_text().startswith("dtype,")

    def test_i2s_sweep_dsp_flat(self, tmp_path):
        spec = I2sSweepSpec(modes=(BusMode.TDM_I2S, BusMode.TDM_DSP),
                            n_devices=(1, 2, 4, 8, 16), frame_bits=(32,))
        report, rows = run_i2s_sweep(spec, seed=0, out_dir=tmp_path)
        assert report.passed
        dsp = [r["latency_tclk"] for r in rows if r["mode"] == "tdm-dsp"]
        assert len(set(dsp)) == 1
        tdm = [(r["n_devices"], r["latency_tclk"]) for r in rows
               if r["mode"] == "tdm-i2s"]
        assert sorted(tdm) == tdm and len({v for _, v in tdm}) == len(tdm)

    def test_i2s_scenario_wav_payload(self, tmp_path):
        bus = BusConfig(BusMode.TDM_DSP, 2, 16)
        spec = I2sRunSpec(bus=bus, periods=4, export_wav=True)
        report = run_i2s_scenario(spec, seed=3, out_dir=tmp_path)
        assert report.passed
        wav = tmp_path / "payloads.wav"
        assert wav.exists()
        spec2 = I2sRunSpec(bus=bus, payload_source="wav",
                           payload_path=str(wav))
        report2 = run_i2s_scenario(spec2, seed=0)
        assert report2.passed
        assert report2.metrics["periods"] == 4


class TestCli:
    def _write(self, tmp_path, doc):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(doc))
        return str(p)

    def test_fft_run_ok(self, tmp_path, capsys):
        cfg = self._write(tmp_path, fft_config())
        code = cli.main(["fft", "run", "--config", cfg,
                         "--out", str(tmp_path / "out"), "--format", "json"])
        assert code == 0
        out = capsys.readouterr().out
        assert json.loads(out)["passed"] is True
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "report.txt").exists()

    def test_cli_reports_are_byte_identical(self, tmp_path):
        cfg = self._write(tmp_path, fft_config())
        cli.main(["fft", "run", "--config", cfg, "--out", str(tmp_path / "a")])
        cli.main(["fft", "run", "--config", cfg, "--out", str(tmp_path / "b")])
        a = (tmp_path / "a" / "report.json").read_bytes()
        b = (tmp_path / "b" / "report.json").read_bytes()
        assert a == b

    def test_seed_override(self, tmp_path):
        cfg = self._write(tmp_path, fft_config())
        cli.main(["fft", "run", "--config", cfg, "--seed", "99",
                  "--out", str(tmp_path / "a")])
        doc = json.loads((tmp_path / "a" / "report.json").read_text())
        assert doc["seed"] == 99

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = self._write(tmp_path, {"version": 1, "kind": "nope"})
        assert cli.main(["fft", "run", "--config", cfg]) == 2

    def test_kind_mismatch_exits_2(self, tmp_path):
        cfg = self._write(tmp_path, fft_config())
        assert cli.main(["i2s", "run", "--config", cfg]) == 2

    def test_check_failure_exits_1(self, tmp_path, monkeypatch):
        monkeypatch.setitem(harness.SNR_FLOORS_DB, DataType.C32, 1000.0)
        cfg = self._write(tmp_path, fft_config())
        assert cli.main(["fft", "run", "--config", cfg]) == 1

    def test_i2s_run_with_timeline(self, tmp_path):
        cfg = self._write(tmp_path, {
            "version": 1, "kind": "i2s-run", "seed": 2,
            "i2s": {"mode": "tdm-i2s", "n_devices": 4, "frame_bits": 32}})
        code = cli.main(["i2s", "run", "--config", cfg,
                         "--out", str(tmp_path / "out"), "--timeline-dump"])
        assert code == 0
        assert (tmp_path / "out" / "timeline.vcd").exists()

    def test_sweep_csv(self, tmp_path):
        cfg = self._write(tmp_path, {
            "version": 1, "kind": "fft-sweep", "seed": 1,
            "sweep": {"dtypes": ["C64"], "n_points": [8, 16, 32]}})
        code = cli.main(["fft", "sweep", "--config", cfg,
                         "--out", str(tmp_path / "out")])
        assert code == 0
        csv_text = (tmp_path / "out" / "summary.csv").read_text()
        assert csv_text.count("\n") == 4  # header + 3 rows

    def test_schedule_dump(self, tmp_path, capsys):
        cfg = self._write(tmp_path, fft_config(n_points=8, dtype="C64"))
        code = cli.main(["schedule", "dump", "--config", cfg,
                         "--out", str(tmp_path / "out")])
        assert code == 0
        text = (tmp_path / "out" / "schedule.txt").read_text()
        assert "# stage 0 of 8-point C64" in text
        assert "# reorder of 8-point C64" in text

    def test_schedule_dump_single_stage(self, tmp_path, capsys):
        cfg = self._write(tmp_path, fft_config(n_points=16, dtype="C16"))
        code = cli.main(["schedule", "dump", "--config", cfg, "--stage", "1"])
        assert code == 0
        out = capsys.readouterr().out
        assert "# stage 1 of 16-point C16" in out
        assert "# reorder" not in out
