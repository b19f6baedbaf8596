import json

import numpy as np
import pytest

from spectralsr.cli import main
from spectralsr.model import load_checkpoint
from spectralsr.signals import read_dataset, read_records, write_records


def run(argv):
    return main([str(a) for a in argv])


MICRO_TRAIN = {
    "model": {"preset": "micro"},
    "train": {"n_scenes": 8, "batch": 4, "epochs": 2, "val_scenes": 0},
}


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return path


def test_generate_creates_dataset(tmp_path):
    out = tmp_path / "data.bin"
    code = run(["generate", "--n", 5, "--out", out, "--seed", 3,
                "--signal-dim", 16, "--n-sr", 128, "--snr", 10.0])
    assert code == 0
    data = read_dataset(out)
    assert data.signals.shape == (5, 16)
    assert len(data.scenes) == 5
    assert data.meta["snr_db"] == 10.0


def test_generate_is_deterministic(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    args = ["generate", "--n", 4, "--seed", 9, "--signal-dim", 16, "--n-sr", 64]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_writes_checkpoint_and_log(tmp_path):
    cfg = write_config(tmp_path, MICRO_TRAIN)
    ckpt, log = tmp_path / "m.ckpt", tmp_path / "log.csv"
    assert run(["train", "--config", cfg, "--out", ckpt, "--log", log]) == 0
    store = load_checkpoint(ckpt)
    assert store.step == 4
    assert log.read_text().startswith("step,loss,lr")


def test_train_bad_config_exits_2(tmp_path):
    cfg = write_config(tmp_path, {"model": {"preset": "gigantic"}})
    assert run(["train", "--config", cfg, "--out", tmp_path / "m.ckpt"]) == 2
    cfg2 = tmp_path / "nonjson.json"
    cfg2.write_text("{not json")
    assert run(["train", "--config", cfg2, "--out", tmp_path / "m.ckpt"]) == 2


def test_eval_periodogram_report(tmp_path, capsys):
    data = tmp_path / "d.bin"
    run(["generate", "--n", 3, "--out", data, "--seed", 1,
         "--signal-dim", 32, "--n-sr", 256])
    out = tmp_path / "report.json"
    assert run(["eval", "--data", data, "--method", "periodogram", "--out", out]) == 0
    report = json.loads(out.read_text())
    assert report["records"] == 3
    assert np.isfinite(report["mean_psnr_db"])


def test_eval_model_roundtrip(tmp_path):
    cfg = write_config(tmp_path, {
        "model": {"preset": "micro"},
        "train": {"n_scenes": 4, "batch": 2, "epochs": 1, "val_scenes": 0},
    })
    ckpt = tmp_path / "m.ckpt"
    run(["train", "--config", cfg, "--out", ckpt])
    data = tmp_path / "d.bin"
    run(["generate", "--n", 2, "--out", data, "--seed", 1,
         "--signal-dim", 8, "--n-sr", 32])
    out = tmp_path / "report.json"
    assert run(["eval", "--data", data, "--method", "model",
                "--checkpoint", ckpt, "--out", out]) == 0
    assert json.loads(out.read_text())["method"] == "model"


def test_eval_model_without_checkpoint_exits_2(tmp_path):
    data = tmp_path / "d.bin"
    run(["generate", "--n", 1, "--out", data, "--signal-dim", 8, "--n-sr", 32])
    assert run(["eval", "--data", data, "--method", "model"]) == 2


def test_eval_missing_data_exits_1(tmp_path):
    assert run(["eval", "--data", tmp_path / "absent.bin"]) == 1


def test_compare_resolution_outputs_are_reproducible(tmp_path):
    args = ["compare", "--methods", "periodogram,music", "--experiment",
            "resolution", "--trials", 5, "--n", 32, "--n-grid", 256, "--seed", 4]
    p1, p2 = tmp_path / "r1", tmp_path / "r2"
    assert run(args + ["--out", p1]) == 0
    assert run(args + ["--out", p2]) == 0
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    header = (tmp_path / "r1.csv").read_text().split("\n")[0]
    assert header == "x,music,periodogram"


def test_compare_sidelobe_writes_condition_files(tmp_path):
    prefix = tmp_path / "side"
    assert run(["compare", "--methods", "periodogram", "--experiment", "sidelobe",
                "--n", 32, "--n-grid", 128, "--out", prefix]) == 0
    files = sorted(p.name for p in tmp_path.glob("side_*.csv"))
    assert files == [
        "side_sep0.6_snr0dB.csv",
        "side_sep0.6_snr20dB.csv",
        "side_sep1.5_snr0dB.csv",
        "side_sep1.5_snr20dB.csv",
    ]


def test_baseline_runs_all_methods(tmp_path):
    rng = np.random.default_rng(0)
    sig = rng.normal(size=(2, 32)) + 1j * rng.normal(size=(2, 32))
    src = tmp_path / "sig.bin"
    write_records(src, sig)
    for method in ("periodogram", "music", "omp"):
        out = tmp_path / f"{method}.bin"
        assert run(["baseline", "--method", method, "--data", src,
                    "--out", out, "--n-grid", 128, "--order", 2]) == 0
        spectra = read_records(out)
        assert spectra.shape == (2, 128)
        assert np.all(spectra.real >= 0)


def test_baseline_bad_input_exits_1(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX1234")
    assert run(["baseline", "--method", "periodogram", "--data", bad,
                "--out", tmp_path / "o.bin"]) == 1
