import json

import numpy as np
import pytest

from congruity.cli import main

FAST_FLAGS = ["--d", "8", "--h", "2", "--mca-layers-text-image", "1",
              "--mca-layers-text-knowledge", "1", "--gat-layers", "1",
              "--max-epochs", "2", "--early-stop-patience", "2",
              "--batch-size", "8", "--lr", "1e-3"]


def _gen(tmp_path, name="data", count=12, seed=3):
    prefix = tmp_path / name
    code = main(["gen-synth", "--count", str(count), "--seed", str(seed),
                 "--p", "2", "--n-min", "3", "--n-max", "5", "--d-raw", "8",
                 "--out", str(prefix)])
    assert code == 0
    return prefix


def test_gen_synth_then_train_then_eval(tmp_path, capsys):
    prefix = _gen(tmp_path)
    ckpt = tmp_path / "model.hcec"
    code = main(["train", "--data", str(prefix), "--out", str(ckpt), *FAST_FLAGS])
    assert code == 0
    assert ckpt.exists()

    code = main(["eval", "--checkpoint", str(ckpt), "--data", str(prefix)])
    assert code == 0
    metrics = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(metrics) >= {"accuracy", "precision", "recall", "f1"}


def test_gen_synth_is_deterministic(tmp_path):
    a = _gen(tmp_path, "a", seed=9)
    b = _gen(tmp_path, "b", seed=9)
    assert (tmp_path / "a.blob").read_bytes() == (tmp_path / "b.blob").read_bytes()


def test_eval_without_checkpoint_exits_1(capsys):
    assert main(["eval", "--data", "whatever"]) == 1
    assert "checkpoint" in capsys.readouterr().err


def test_unknown_flag_exits_1_with_usage(capsys):
    assert main(["train", "--data", "x", "--definitely-not-a-flag"]) == 1
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_missing_data_file_exits_2(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "no.hcec"),
                 "--data", str(tmp_path / "missing")]) == 2


def test_invalid_config_value_exits_1(tmp_path, capsys):
    prefix = _gen(tmp_path)
    assert main(["train", "--data", str(prefix), "--d", "7", "--h", "2"]) == 1
    assert "divide" in capsys.readouterr().err


def test_config_file_applies_and_flags_override(tmp_path):
    prefix = _gen(tmp_path)
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("d = 8\nh = 2\nmca-layers-text-image = 1\n"
                        "mca_layers_text_knowledge = 1\ngat-layers = 1\n"
                        "max-epochs = 1\nearly-stop-patience = 1\n"
                        "batch-size = 8\nlr = 1e-3  # comment\n")
    ckpt = tmp_path / "m.hcec"
    assert main(["train", "--data", str(prefix), "--config", str(cfg_file),
                 "--out", str(ckpt)]) == 0
    assert ckpt.exists()


def test_gradcheck_cli_small_model(capsys):
    code = main(["gradcheck", "--d", "8", "--h", "2", "--n", "3", "--r", "4",
                 "--m", "2", "--mca-layers-text-image", "1",
                 "--mca-layers-text-knowledge", "1", "--gat-layers", "1",
                 "--max-knowledge-len", "4", "--seed", "5"])
    out = capsys.readouterr().out
    assert code == 0
    assert "max relative error" in out


def test_dump_congruity_cli(tmp_path, capsys):
    prefix = _gen(tmp_path)
    ckpt = tmp_path / "model.hcec"
    assert main(["train", "--data", str(prefix), "--out", str(ckpt), *FAST_FLAGS]) == 0
    out_csv = tmp_path / "scores.csv"
    assert main(["dump-congruity", "--checkpoint", str(ckpt), "--data", str(prefix),
                 "--out", str(out_csv)]) == 0
    text = out_csv.read_text()
    assert "# section: atomic_scores" in text
    assert "# section: patch_weights" in text
