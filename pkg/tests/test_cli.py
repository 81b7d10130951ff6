import hashlib
import json
import subprocess
import sys

import numpy as np
from imdd_snn import cli, equalizers, evaluation, link, training

SMALL_TRAIN = """
[train]
batches = 2
batch_symbols = 1000
n_hidden = 6
T = 4
pilot_symbols = 5000
[sweep]
min_errors = 100
max_symbols = 30000
"""


def write_cfg(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_help_and_unknown_flag():
    ok = subprocess.run([sys.executable, "-m", "imdd_snn", "--help"], capture_output=True, text=True)
    assert ok.returncode == 0 and "sweep-sigma" in ok.stdout
    bad = subprocess.run([sys.executable, "-m", "imdd_snn", "taps", "--bogus"], capture_output=True, text=True)
    assert bad.returncode != 0


def test_config_errors_exit_2(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["taps", "--out", out]) == cli.EXIT_CONFIG  # no preset
    assert cli.main(["train", "--channel", "A", "--lr", "-1", "--out", out]) == cli.EXIT_CONFIG
    assert cli.main(["taps", "--channel", "Z", "--out", out]) == cli.EXIT_CONFIG
    unknown_key = write_cfg(tmp_path, "[channel]\npreset = A\nwavelenght = 1.0\n")
    assert cli.main(["taps", "--config", unknown_key, "--out", out]) == cli.EXIT_CONFIG
    unknown_section = write_cfg(tmp_path, "[chanel]\npreset = A\n", "s.ini")
    assert cli.main(["taps", "--config", unknown_section, "--out", out]) == cli.EXIT_CONFIG
    empty = write_cfg(tmp_path, "[channel]\npreset = A\n[sweep]\nsigma2_db = ()\n", "e.ini")
    assert cli.main(["sweep-sigma", "--config", empty, "--kinds", "LMMSE", "--out", out]) == cli.EXIT_CONFIG
    low = write_cfg(tmp_path, "[channel]\npreset = A\n[sweep]\nmin_errors = 10\n", "m.ini")
    assert cli.main(["eval", "--config", low, "--kinds", "LMMSE", "--out", out]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_read_config_parses_literals(tmp_path):
    doc = cli.read_config(write_cfg(tmp_path, "[channel]\npreset = B\nlength_km = 3.5\n[sweep]\nkinds = ('LMMSE', 'CDFE')\n"))
    assert doc == {"channel": {"preset": "B", "length_km": 3.5}, "sweep": {"kinds": ("LMMSE", "CDFE")}}


def test_flags_override_config(tmp_path):
    cfg_path = write_cfg(tmp_path, "[channel]\npreset = A\n[run]\nseed = 4\n[train]\nlr = 0.5\n")
    args = cli.build_parser().parse_args(["train", "--config", cfg_path, "--channel", "B", "--seed", "9", "--lr", "0.01"])
    cfg = cli.resolve(args)
    assert cfg.channel.name == "B" and cfg.seed == 9 and cfg.train["lr"] == 0.01


def test_simulate_is_deterministic_and_sliceable(tmp_path):
    ini = write_cfg(tmp_path, "[channel]\npreset = A\nlength_km = 0.0\nrx_filter = 'rrc'\n[simulate]\ncount = 3000\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", ini, "--seed", "3", "--out", str(out)]) == 0
    first = digest(out / "simulate.csv")
    assert cli.main(["simulate", "--config", ini, "--seed", "3", "--out", str(out)]) == 0
    assert digest(out / "simulate.csv") == first
    data = np.genfromtxt(out / "simulate.csv", delimiter=",", names=True)
    assert len(data) == 3000
    # without dispersion the symbols separate into ordered clusters despite -20 dB noise
    ch = link.preset_channel("A", length_km=0.0, rx_filter="rrc")
    eq = training.fit_linear("LMMSE", ch, -20.0, 0, 20_000)
    decided = equalizers.equalize_stream(eq, data["rx_symbol"])
    assert np.mean(decided[20:-20] != data["tx_class"][20:-20].astype(int)) < 0.01


def test_train_checkpoints_are_byte_identical(tmp_path):
    ini = write_cfg(tmp_path, "[channel]\npreset = A\n" + SMALL_TRAIN)
    out = tmp_path / "o"
    for kind in ("SNN_DFE", "ANN_DFE", "CDFE"):
        assert cli.main(["train", "--config", ini, "--kind", kind, "--out", str(out)]) == 0
        ck = out / f"{kind}_A.json"
        first = digest(ck)
        assert cli.main(["train", "--config", ini, "--kind", kind, "--out", str(out)]) == 0
        assert digest(ck) == first
        assert training.load_checkpoint(ck).kind == kind


def test_eval_and_sweeps_are_reproducible(tmp_path):
    ini = write_cfg(tmp_path, "[channel]\npreset = A\n" + SMALL_TRAIN)
    out = str(tmp_path / "o")
    common = ["--config", ini, "--out", out, "--workers", "2"]
    runs = [
        (["eval", "--kinds", "LMMSE,CDFE", "--sigma2-db=-16"], "eval.csv"),
        (["sweep-sigma", "--kinds", "CDFE,ANN_DFE", "--sigma2-db=-15,-16"], "sweep_sigma.csv"),
        (["sweep-length", "--kinds", "LMMSE,NF_ANN", "--lengths-km", "1,2"], "sweep_length.csv"),
    ]
    for argv, name in runs:
        assert cli.main(argv + common) == 0
        first = digest(tmp_path / "o" / name)
        assert cli.main(argv + common) == 0
        assert digest(tmp_path / "o" / name) == first
    header = (tmp_path / "o" / "sweep_length.csv").read_text().splitlines()[0]
    assert header == ",".join(evaluation.CSV_HEADER)


def test_eval_with_checkpoint_and_geometry_mismatch(tmp_path):
    ini = write_cfg(tmp_path, "[channel]\npreset = A\n" + SMALL_TRAIN)
    out = str(tmp_path / "o")
    assert cli.main(["train", "--config", ini, "--kind", "NF_ANN", "--out", out]) == 0
    ck = str(tmp_path / "o" / "NF_ANN_A.json")
    assert cli.main(["eval", "--config", ini, "--checkpoint", ck, "--sigma2-db=-15", "--out", out]) == 0
    assert cli.main(["eval", "--channel", "B", "--checkpoint", ck, "--out", out]) == cli.EXIT_CONFIG


def test_neural_eval_without_checkpoint_is_a_config_error(tmp_path):
    assert cli.main(["eval", "--channel", "A", "--kinds", "SNN_DFE", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_corrupt_checkpoint_exits_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["eval", "--channel", "A", "--checkpoint", str(bad), "--out", str(tmp_path)]) == cli.EXIT_RUNTIME


def test_taps_command(tmp_path):
    assert cli.main(["taps", "--channel", "B", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "taps.json").read_text())
    assert doc["configured_n_tap"] == 41 and doc["estimated_taps"] >= 1
