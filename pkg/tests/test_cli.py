import json
import time

import numpy as np
import pytest

from onsetloc.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from onsetloc.config import RunConfig, LocalizeConfig, GridConfig, save_config
from onsetloc.signal import MultichannelSignal, read_csv, write_wav

from pathlib import Path

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_print_config(capsys):
    assert main(["localize", "--print-config"]) == EXIT_OK
    assert 'method = "onset-mccc"' in capsys.readouterr().out


def test_gcc_phat_needs_two_mics(tmp_path, capsys):
    cfg = tmp_path / "g.toml"
    save_config(RunConfig(localize=LocalizeConfig(method="gcc-phat")), cfg)
    write_wav(MultichannelSignal(np.zeros((8, 960)), 48000), tmp_path / "a.wav")
    code = main(["localize", str(tmp_path / "a.wav"), "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "mcc-phat" in capsys.readouterr().err


def test_channel_mismatch_is_data_error(tmp_path):
    write_wav(MultichannelSignal(np.zeros((3, 960)), 48000), tmp_path / "a.wav")
    assert main(["localize", str(tmp_path / "a.wav"), "--out-dir", str(tmp_path)]) == EXIT_DATA


def test_missing_wav_is_data_error(tmp_path):
    assert main(["localize", str(tmp_path / "nope.wav"), "--out-dir", str(tmp_path)]) == EXIT_DATA


def test_bad_config_exit(tmp_path):
    (tmp_path / "r.toml").write_text("[localize]\nmethod = 'x'\n")
    assert main(["localize", "--config", str(tmp_path / "r.toml"), "--print-config"]) == EXIT_CONFIG


def test_bad_threads(tmp_path, monkeypatch):
    write_wav(MultichannelSignal(np.zeros((8, 960)), 48000), tmp_path / "a.wav")
    monkeypatch.setenv("ONSETLOC_THREADS", "zero")
    assert main(["localize", str(tmp_path / "a.wav"), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_rir_csv(tmp_path):
    out = tmp_path / "rir.csv"
    assert main(["rir", "--distance", "1.0", "--t60", "0.2", "--out", str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert header == ["index", "tap"] and float(rows[140][1]) == pytest.approx(1.0)
    assert main(["rir", "--distance", "-1", "--out", str(out)]) == EXIT_CONFIG


def _pipeline(tmp_path, tag, threads, method="mcc-phat", scene="smoke_scene.toml"):
    d = tmp_path / tag
    d.mkdir()
    cfg = d / "run.toml"
    save_config(RunConfig(localize=LocalizeConfig(method=method, threshold=1e-6)), cfg)
    assert main(["simulate", str(CONFIGS / scene), "--out-wav", str(d / "s.wav")]) == EXIT_OK
    assert main(["localize", str(d / "s.wav"), "--config", str(cfg), "--out-dir", str(d / "out"),
                 "--threads", str(threads)]) == EXIT_OK
    assert main(["evaluate", str(d / "out" / "doa.csv"), str(d / "s.truth.csv"), "--config", str(cfg),
                 "--out", str(d / "results.json")]) == EXIT_OK
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_pipeline_byte_identical(tmp_path):
    a = _pipeline(tmp_path, "a", 1)
    b = _pipeline(tmp_path, "b", 3)
    assert a.keys() == b.keys() and a == b
    res = json.loads(a["results.json"])
    assert set(res) >= {"per_source_rmse", "ospa_series", "ospa_mean", "cardinality_mean"}


def test_onset_mccc_smoke_under_a_minute(tmp_path):
    t = time.perf_counter()
    files = _pipeline(tmp_path, "m", 1, method="onset-mccc")
    assert time.perf_counter() - t < 60
    assert "out/map.csv" in files


def test_evaluate_perfect_and_misaligned(tmp_path):
    truth = tmp_path / "t.csv"
    truth.write_text("time_s,source_id,azimuth_deg,active_flag\n0.0,0,60.0,1\n0.5,0,60.0,1\n1.0,0,60.0,1\n")
    doa = tmp_path / "d.csv"
    doa.write_text("frame_time_s,azimuth_deg\n0.0,60.0\n0.5,60.0\n1.0,60.0\n")
    assert main(["evaluate", str(doa), str(truth), "--out", str(tmp_path / "r.json")]) == EXIT_OK
    res = json.loads((tmp_path / "r.json").read_text())
    assert res["ospa_mean"] == 0.0 and res["overall_rmse"] == 0.0
    doa.write_text("frame_time_s,azimuth_deg\n7.3,60.0\n")
    assert main(["evaluate", str(doa), str(truth), "--out", str(tmp_path / "r.json")]) == EXIT_DATA
