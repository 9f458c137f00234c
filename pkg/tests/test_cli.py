"""Command-line interface: end-to-end flows, determinism, exit codes."""

import pytest

from dualcast.cli import main

CONFIG = """\
# synthetic benchmark, desk scale
synth.n_exo = 2
synth.n_endo = 1
synth.length = 300
synth.seed = 0

model.lookback = 16
model.horizon = 4
model.d_model = 8
model.patch_len = 8

train.epochs = 2
train.batch_size = 8
train.lr = 0.005
train.max_train_windows_per_epoch = 32
train.max_val_windows = 8
"""


@pytest.fixture()
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CONFIG)
    return str(p)


def run(args):
    return main(args)


def test_synth_writes_csv(cfg_path, tmp_path, capsys):
    out = tmp_path / "data.csv"
    assert run(["synth", "--config", cfg_path, "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "exo0,exo1,endo0"
    assert len(lines) == 301


def test_train_eval_predict_flow(cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert run(["train", "--config", cfg_path, "--out", str(out_dir)]) == 0
    ckpt = out_dir / "checkpoint.bin"
    assert ckpt.exists()
    assert (out_dir / "loss_trace.csv").exists()
    capsys.readouterr()

    metrics = tmp_path / "metrics.csv"
    assert run(["eval", "--checkpoint", str(ckpt), "--out", str(metrics)]) == 0
    lines = metrics.read_text().strip().split("\n")
    assert lines[0] == "run_id,variant,horizon,mse,mae"
    assert len(lines) == 1 + 4 + 1  # per-step rows plus the average row
    assert lines[-1].split(",")[2] == "avg"

    preds = tmp_path / "preds.csv"
    assert run(["predict", "--checkpoint", str(ckpt), "--out", str(preds)]) == 0
    header = preds.read_text().split("\n", 1)[0]
    assert header == "window,channel,step,value"


def test_eval_twice_is_byte_identical(cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "run"
    run(["train", "--config", cfg_path, "--out", str(out_dir)])
    ckpt = str(out_dir / "checkpoint.bin")
    m1, m2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
    run(["eval", "--checkpoint", ckpt, "--out", str(m1)])
    run(["eval", "--checkpoint", ckpt, "--out", str(m2)])
    assert m1.read_bytes() == m2.read_bytes()


def test_predict_no_future_exo_differs(cfg_path, tmp_path, capsys):
    out_dir = tmp_path / "run"
    run(["train", "--config", cfg_path, "--out", str(out_dir)])
    ckpt = str(out_dir / "checkpoint.bin")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["predict", "--checkpoint", ckpt, "--out", str(a)])
    run(["predict", "--checkpoint", ckpt, "--no-future-exo", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_seed_override_changes_run(cfg_path, tmp_path, capsys):
    d1, d2, d3 = (tmp_path / n for n in ("r1", "r2", "r3"))
    run(["train", "--config", cfg_path, "--out", str(d1), "--seed", "1"])
    run(["train", "--config", cfg_path, "--out", str(d2), "--seed", "1"])
    run(["train", "--config", cfg_path, "--out", str(d3), "--seed", "2"])
    b1 = (d1 / "checkpoint.bin").read_bytes()
    assert b1 == (d2 / "checkpoint.bin").read_bytes()
    assert b1 != (d3 / "checkpoint.bin").read_bytes()


def test_missing_config_file_exit_3(capsys):
    assert run(["synth", "--config", "/nonexistent.cfg", "--out", "/tmp/x.csv"]) == 3
    assert "error" in capsys.readouterr().err


def test_unknown_config_key_exit_4(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("model.wibble = 3\n")
    assert run(["train", "--config", str(p)]) == 4
    assert "wibble" in capsys.readouterr().err


def test_malformed_config_line_exit_4(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("model.lookback 16\n")
    assert run(["train", "--config", str(p)]) == 4


def test_bad_dataset_exit_5(cfg_path, tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text("1.0,2.0\n3.0,oops\n")
    p = tmp_path / "d.cfg"
    p.write_text(CONFIG + f"data.path = {data}\ndata.endo_count = 1\n")
    assert run(["train", "--config", str(p)]) == 5
    assert "line 2" in capsys.readouterr().err


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 2


def test_ablate_emits_all_variants(cfg_path, tmp_path, capsys):
    out = tmp_path / "ablate.csv"
    assert run(["ablate", "--config", cfg_path, "--out", str(out)]) == 0
    rows = out.read_text().strip().split("\n")[1:]
    variants = [r.split(",")[1] for r in rows]
    assert variants == ["a", "b", "c", "d", "e", "full"]


def test_sweep_over_lookbacks(cfg_path, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--config", cfg_path, "--lookbacks", "8,16",
                "--out", str(out)]) == 0
    rows = out.read_text().strip().split("\n")[1:]
    assert [r.split(",")[1] for r in rows] == ["H8", "H16"]
