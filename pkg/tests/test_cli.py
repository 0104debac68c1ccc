import json
import math
import subprocess
import sys

import numpy as np
import pytest
import scipy.signal as ss

from ebenkit import backend, cli
from ebenkit.audio import AudioBuffer, read_wav, write_wav
from ebenkit.neural import REFERENCE_CONFIG, NetworkConfig, count_params
from conftest import noise

SMALL = NetworkConfig(encoder_strides=(2, 2), encoder_channels=(8, 16), first_channels=4,
                      residual_dilations=(1, 3), disc_base_channels=6, q_bands=3)


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def bursty(n, seed):
    """Noise with a slow on/off envelope, loosely speech-like for the VAD."""
    env = 0.55 + 0.45 * np.sign(np.sin(2 * np.pi * 1.3 * np.arange(n) / 16000))
    return AudioBuffer(noise(n, seed=seed, scale=0.2).samples * env)


@pytest.fixture
def wav(tmp_path):
    def make(name, buf, encoding="float32"):
        p = tmp_path / name
        write_wav(p, buf, encoding)
        return p
    return make


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(SMALL.to_json())
    return p


# ------------------------------------------------------------------- pqmf

def test_pqmf_design(capsys, tmp_path):
    rep = tmp_path / "design.txt"
    d = run_json(capsys, "pqmf", "design", "--bands", 8, "--taps-per-band", 8, "--out", rep)
    assert d["bands"] == 8 and d["length"] == 64 and d["delay"] == 63
    assert abs(d["criterion_residual"]) < 1e-9
    assert rep.read_text().strip()


def test_pqmf_roundtrip(capsys, wav, tmp_path):
    src = wav("noise.wav", noise(32000, seed=1))
    out = tmp_path / "rt.wav"
    d = run_json(capsys, "pqmf", "roundtrip", "--bands", 4, "--taps-per-band", 8, "--in", src, "--out", out)
    assert d["ser_db"] >= 55.0
    assert len(read_wav(out)) == 32000


# ----------------------------------------------------------------- degrade

def test_degrade_without_seed_is_usage_error(capsys, wav, tmp_path):
    src = wav("a.wav", noise(16000))
    code, out, err = run(capsys, "degrade", "fixed", "--in", src, "--out", tmp_path / "b.wav")
    assert code == 1
    assert "--seed" in err and "usage:" in err
    assert out == ""
    assert not (tmp_path / "b.wav").exists()


@pytest.mark.parametrize("seed", ["-1", "abc", str(2**64)])
def test_bad_seed_is_usage_error(capsys, wav, tmp_path, seed):
    src = wav("a.wav", noise(16000))
    code, _, _ = run(capsys, "degrade", "fixed", "--in", src, "--out", tmp_path / "b.wav", "--seed", seed)
    assert code == 1


def test_degrade_fixed_deterministic(capsys, wav, tmp_path):
    src = wav("a.wav", noise(32000, seed=2))
    a, b = tmp_path / "b1.wav", tmp_path / "b2.wav"
    d1 = run_json(capsys, "degrade", "fixed", "--in", src, "--out", a, "--seed", 99)
    d2 = run_json(capsys, "degrade", "fixed", "--in", src, "--out", b, "--seed", "0x63")
    assert a.read_bytes() == b.read_bytes()
    assert d1["rel_db"] == d2["rel_db"] and -23.5 <= d1["rel_db"] <= -22.5
    c = tmp_path / "b3.wav"
    run_json(capsys, "degrade", "fixed", "--in", src, "--out", c, "--seed", 100)
    assert c.read_bytes() != a.read_bytes()


def test_degrade_random_default_bounds(capsys, wav, tmp_path):
    src = wav("a.wav", noise(32000, seed=3))
    d = run_json(capsys, "degrade", "random", "--in", src, "--out", tmp_path / "r.wav", "--seed", 5)
    assert d["pipeline"] == "random"


def test_degrade_batch(capsys, wav, tmp_path):
    (tmp_path / "in" / "sub").mkdir(parents=True)
    for i in range(3):
        write_wav(tmp_path / "in" / ("sub" if i else "") / f"f{i}.wav", noise(16000, seed=i), "float32")
    d = run_json(capsys, "degrade", "batch", "--in", tmp_path / "in", "--out", tmp_path / "out", "--seed", 7)
    assert d["master_seed"] == 7 and len(d["files"]) == 3
    assert (tmp_path / "out" / "sub" / "f1.wav").exists()


def test_wrong_sample_rate_is_data_error(capsys, wav, tmp_path):
    src = wav("a.wav", AudioBuffer(noise(8000).samples, 8000))
    code, _, err = run(capsys, "degrade", "fixed", "--in", src, "--out", tmp_path / "b.wav", "--seed", 1)
    assert code == 2 and "16000" in err


def test_missing_file_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "metrics", "--in", tmp_path / "nope.wav", "--ref", tmp_path / "nope.wav")
    assert code == 2 and err.startswith("error:")


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["pqmf"], ["pqmf", "design", "--bands", "x"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 1


# ------------------------------------------------------------------- sysid

def test_sysid_estimate_and_coherence(capsys, wav, tmp_path):
    y = bursty(16000 * 8, seed=4)
    # front-loaded response; a long linear-phase delay would bias frame-wise coherence
    b, a = ss.butter(2, 2500, fs=16000)
    x = y.with_samples(ss.lfilter(b, a, y.samples))
    ref, dev = wav("ref.wav", y), wav("dev.wav", x)
    csv_path = tmp_path / "tf.csv"
    d = run_json(capsys, "sysid", "estimate", "--ref", ref, "--in", dev, "--out", csv_path)
    assert d["n_segments"] >= 3 and d["bins"] == 257 and 0 < d["active_fraction"] <= 1
    header = csv_path.read_text().splitlines()[0].split(",")
    assert header == ["freq_hz", "median_db", "smoothed_db", "p10_db", "p90_db", "coherence"]
    c = run_json(capsys, "sysid", "coherence", "--ref", ref, "--in", dev, "--normalize")
    coh = np.array(c["coherence"])
    freqs = np.array(c["freq_hz"])
    assert coh[(freqs > 50) & (freqs < 1500)].min() > 0.99


def test_sysid_too_short_is_data_error(capsys, wav):
    ref = wav("ref.wav", noise(4000))
    assert run(capsys, "sysid", "estimate", "--ref", ref, "--in", ref, "--out", "unused.csv")[0] == 2


# ---------------------------------------------------------- weights / networks

def test_weights_init_and_inspect(capsys, wav, tmp_path, small_cfg):
    w = tmp_path / "w.ebw"
    cfg_out = tmp_path / "cfg_out.json"
    d = run_json(capsys, "weights", "init", "--config", small_cfg, "--seed", 1, "--out", w, "--config-out", cfg_out)
    gen, disc = count_params(SMALL)
    assert d["generator_params"] == gen and d["discriminator_params"] == disc
    assert d["total_params"] == gen + disc and d["file_bytes"] == w.stat().st_size
    assert json.loads(cfg_out.read_text()) == SMALL.to_dict()
    i = run_json(capsys, "weights", "inspect", "--weights", w, "--config", small_cfg)
    assert i["total_params"] == gen + disc and len(i["tensors"]) == d["tensors"]
    assert run(capsys, "weights", "inspect", "--weights", w)[0] == 0
    # loading against the wrong graph (the reference one) is a data error
    src = wav("in.wav", noise(4000))
    code, _, err = run(capsys, "enhance", "--in", src, "--out", tmp_path / "x.wav", "--weights", w)
    assert code == 2 and "ShapeMismatchOnLoad" in err
    assert run(capsys, "weights", "inspect", "--weights", w, "--config", tmp_path / "missing.json")[0] == 2


def test_enhance_reference_deterministic(capsys, wav, tmp_path):
    w = tmp_path / "w.ebw"
    run_json(capsys, "weights", "init", "--seed", 42, "--out", w)
    src = wav("in.wav", noise(16000, seed=9))
    outs = []
    for i in range(2):
        out = tmp_path / f"y{i}.wav"
        d = run_json(capsys, "enhance", "--in", src, "--out", out, "--weights", w)
        assert d["length"] == 16000 and math.isfinite(d["peak"])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_disc_forward_and_loss(capsys, wav, tmp_path, small_cfg):
    w = tmp_path / "w.ebw"
    run_json(capsys, "weights", "init", "--config", small_cfg, "--seed", 3, "--out", w)
    a, b = wav("a.wav", noise(8000, seed=1)), wav("b.wav", noise(8000, seed=2))
    d = run_json(capsys, "disc-forward", "--in", a, "--config", small_cfg, "--weights", w)
    assert [s["k"] for s in d["scales"]] == [0, 1, 2, 3]
    assert all(len(s["feature_shapes"]) == 4 for s in d["scales"])
    same = run_json(capsys, "loss", "eval", "--ref", a, "--in", a, "--config", small_cfg, "--weights", w)
    assert same["l_g_rec"] == 0.0
    diff = run_json(capsys, "loss", "eval", "--ref", a, "--in", b, "--config", small_cfg, "--weights", w)
    assert diff["l_g_rec"] > 0
    assert diff["l_g_total"] == diff["l_g_adv"] + 100 * diff["l_g_rec"]
    short = wav("c.wav", noise(4000, seed=3))
    assert run(capsys, "loss", "eval", "--ref", a, "--in", short, "--config", small_cfg, "--weights", w)[0] == 2


def test_metrics(capsys, wav):
    x = noise(8000, seed=5)
    a = wav("a.wav", x)
    b = wav("b.wav", x.with_samples(1.01 * x.samples))
    same = run_json(capsys, "metrics", "--in", a, "--ref", a)
    assert same == {"si_sdr_db": "inf", "ser_db": "inf", "length": 8000, "delay": 0}
    d = run_json(capsys, "metrics", "--in", b, "--ref", a)
    assert d["si_sdr_db"] == "inf"
    assert abs(d["ser_db"] - 40.0) < 1e-3


# --------------------------------------------------------------------- bench

def test_bench_cli(capsys, tmp_path, small_cfg):
    before = {p: p.stat().st_mtime_ns for p in tmp_path.iterdir()}
    active = backend.name()
    d = run_json(capsys, "bench", "--config", small_cfg, "--seed", 1, "--seconds", 0.25, "--backend", "python")
    assert d["backend"] == "python" and d["repetitions"] == 10 and len(d["samples_ms"]) == 10
    assert backend.name() == active
    assert {p: p.stat().st_mtime_ns for p in tmp_path.iterdir()} == before
    assert run(capsys, "bench", "--seed", 1, "--reps", 3)[0] == 2


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ebenkit.cli", "pqmf", "design", "--bands", "2"],
                          capture_output=True, text=True, env={"EBEN_NO_COLOR": "1", "PATH": ""})
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["bands"] == 2
    proc = subprocess.run([sys.executable, "-m", "ebenkit.cli", "degrade", "fixed"],
                          capture_output=True, text=True, env={"EBEN_NO_COLOR": "1"})
    assert proc.returncode == 1 and "\033[" not in proc.stderr


def test_color_only_on_tty(monkeypatch):
    monkeypatch.delenv("EBEN_NO_COLOR", raising=False)
    monkeypatch.setattr(sys.stderr, "isatty", lambda: True, raising=False)
    assert "\033[" in cli._color("x", "31")
    monkeypatch.setenv("EBEN_NO_COLOR", "1")
    assert cli._color("x", "31") == "x"


def test_reference_counts_in_init_report(capsys, tmp_path):
    d = run_json(capsys, "weights", "init", "--seed", 0, "--out", tmp_path / "w.ebw")
    assert (d["generator_params"], d["discriminator_params"]) == count_params(REFERENCE_CONFIG)
