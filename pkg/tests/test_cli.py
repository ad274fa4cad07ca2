import json

import pytest

from glntsp.cli import main

TRAIN_FLAGS = ["--hidden", "8", "--kernels", "2", "--layers", "2", "--epochs", "2", "--batch-size", "8",
               "--features", "xy1", "--m-init", "identity", "--init-mode", "identity"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen", "--sizes", "8", "--count", "50", "--seed", "3", "--out", str(out), "--threads", "1"]) == 0
    return out


def test_gen_manifest_and_determinism(data, tmp_path, capsys):
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["total"] == 50 and manifest["counts"] == {"8": 50}
    again = tmp_path / "again"
    assert main(["gen", "--sizes", "8", "--count", "50", "--seed", "3", "--out", str(again), "--threads", "1"]) == 0
    for name in ("tsp8.jsonl", "manifest.json"):
        assert (data / name).read_bytes() == (again / name).read_bytes()
    capsys.readouterr()
    assert main(["gen", "--out", str(data), "--verify"]) == 0
    assert "verified 50 samples" in capsys.readouterr().out


def test_gen_verify_detects_corruption(data, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    lines = (data / "tsp8.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["len"] += 0.5
    (bad / "tsp8.jsonl").write_text(json.dumps(rec) + "\n")
    assert main(["gen", "--out", str(bad / "tsp8.jsonl"), "--verify"]) == 1
    assert "error:" in capsys.readouterr().err


def test_train_and_eval(data, tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["train", "--data", str(data), "--out", str(run), *TRAIN_FLAGS]) == 0
    assert (run / "gln_tsp8.json").exists()
    assert (run / "history.csv").read_text().startswith("epoch,train_loss,val_loss,val_f1")
    assert json.loads((run / "train_config.json").read_text())["hidden"] == 8
    capsys.readouterr()
    ev = tmp_path / "ev"
    assert main(["eval", "--checkpoint", str(run / "gln_tsp8.json"), "--data", str(data), "--out", str(ev)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["m"] == 5 and summary["n"] == 8
    assert 0.0 <= summary["f1"] <= 1.0 and summary["opt_gap"] >= 0.0
    assert json.loads((ev / "eval.json").read_text()) == summary


def test_train_is_reproducible(data, tmp_path):
    for name in ("a", "b"):
        assert main(["train", "--data", str(data), "--out", str(tmp_path / name), "--seed", "4", *TRAIN_FLAGS]) == 0
    for name in ("gln_tsp8.json", "history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_zero_epochs_fails(data, tmp_path, capsys):
    assert main(["train", "--data", str(data), "--out", str(tmp_path), "--epochs", "0"]) == 1
    assert "epochs" in capsys.readouterr().err
    assert not (tmp_path / "gln_tsp8.json").exists()


def test_train_rejects_mixed_sizes(tmp_path, capsys):
    assert main(["gen", "--sizes", "5,6", "--count", "10", "--out", str(tmp_path), "--threads", "1"]) == 0
    capsys.readouterr()
    assert main(["train", "--data", str(tmp_path), "--out", str(tmp_path / "run")]) == 1
    assert "[5, 6]" in capsys.readouterr().err


def test_eval_rejects_size_mismatch(data, tmp_path, capsys):
    other = tmp_path / "d9"
    assert main(["gen", "--sizes", "9", "--count", "10", "--out", str(other), "--threads", "1"]) == 0
    run = tmp_path / "run"
    assert main(["train", "--data", str(data), "--out", str(run), *TRAIN_FLAGS]) == 0
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(run / "gln_tsp8.json"), "--data", str(other), "--out", str(tmp_path)]) == 1
    assert "n=8" in capsys.readouterr().err


def test_bench(tmp_path, capsys):
    args = ["bench", "--n", "8", "--count", "20", "--threads", "1", "--out", str(tmp_path),
            "--solvers", "held_karp,nearest_neighbor,farthest_insertion"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "held_karp" in out and "0.00%" in out
    result = json.loads((tmp_path / "bench.json").read_text())
    assert result["solvers"]["held_karp"]["opt_gap"] == 0.0
    assert result["solvers"]["nearest_neighbor"]["opt_gap"] > 0.0
    first = (tmp_path / "bench.json").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "bench.json").read_bytes() == first


def test_bench_unknown_solver(capsys):
    assert main(["bench", "--n", "8", "--count", "2", "--solvers", "magic"]) == 1
    assert "magic" in capsys.readouterr().err


def test_solve(tmp_path, capsys):
    coords = tmp_path / "c.json"
    coords.write_text(json.dumps([[0, 0], [1, 0], [1, 1], [0, 1]]))
    assert main(["solve", "--coords", str(coords)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["tour"] == [0, 1, 2, 3] and result["len"] == pytest.approx(4.0)


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 6, "count": 3, "solvers": "nearest_neighbor"}))
    assert main(["bench", "--config", str(cfg), "--count", "4", "--threads", "1", "--out", str(tmp_path)]) == 0
    eff = json.loads((tmp_path / "bench_config.json").read_text())
    assert (eff["n"], eff["count"], eff["solvers"]) == (6, 4, "nearest_neighbor")
    cfg.write_text(json.dumps({"bogus": 1}))
    capsys.readouterr()
    assert main(["bench", "--config", str(cfg)]) == 1
    assert "bogus" in capsys.readouterr().err
