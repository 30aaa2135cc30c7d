import hashlib
import json

import pytest

from hdadapt.cli import main
from hdadapt.data import load_corpus
from hdadapt.harness import read_predictions

FAST = ["--dim", "256", "--epochs", "2"]


@pytest.fixture(scope="module")
def corpus_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "c.csv"
    assert main(["synth", "--out", str(path), "--per-class", "6", "--timesteps", "12"]) == 0
    return path


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_synth_flags_and_sidecar(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_domains": 3, "n_classes": 2, "samples_per_class": 4, "seed": 2}))
    code, out = run_json(capsys, ["synth", "--spec", str(spec), "--shift", "0.5", "--out",
                                  str(tmp_path / "c.csv"), "--spec-out", str(tmp_path / "eff.json")])
    assert code == 0 and out["segments"] == 24 and out["spec"]["shift"] == 0.5
    eff = json.loads((tmp_path / "eff.json").read_text())
    assert eff["n_domains"] == 3 and eff["seed"] == 2
    assert load_corpus(tmp_path / "c.csv").K == 3


def test_synth_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HDADAPT_SEED", "17")
    _, out = run_json(capsys, ["synth", "--out", str(tmp_path / "c.csv"), "--per-class", "1"])
    assert out["spec"]["seed"] == 17
    _, out = run_json(capsys, ["synth", "--out", str(tmp_path / "c.csv"), "--per-class", "1", "--seed", "3"])
    assert out["spec"]["seed"] == 3


def test_train_is_reproducible(corpus_csv, tmp_path, capsys):
    hashes = []
    for name in ("a.zip", "b.zip"):
        code, out = run_json(capsys, ["train", str(corpus_csv), "--model-out", str(tmp_path / name), *FAST])
        assert code == 0
        hashes.append(out["sha256"])
        assert out["sha256"] == hashlib.sha256((tmp_path / name).read_bytes()).hexdigest()
    assert hashes[0] == hashes[1]


@pytest.mark.parametrize("method", ["adaptive", "pooled"])
def test_predict(corpus_csv, tmp_path, capsys, method):
    model = tmp_path / "m.zip"
    main(["train", str(corpus_csv), "--model-out", str(model), "--method", method, *FAST])
    capsys.readouterr()
    code, out = run_json(capsys, ["predict", str(model), str(corpus_csv), "--out", str(tmp_path / "p.csv")])
    assert code == 0 and out["n"] == 96
    assert len(read_predictions(tmp_path / "p.csv")) == 96


def test_eval_lodo_with_baseline(corpus_csv, tmp_path, capsys):
    code, _ = run_json(capsys, ["eval-lodo", str(corpus_csv), "--baseline", "pooled", *FAST,
                                "--out", str(tmp_path / "r.json"), "--predictions", str(tmp_path / "p.jsonl"),
                                "--splits-out", str(tmp_path / "s.json")])
    assert code == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert set(report["arms"]) == {"adaptive", "pooled"}
    assert report["config"]["dim"] == 256 and report["held_out"] == [0, 1, 2, 3]
    assert len(read_predictions(tmp_path / "p.jsonl")) == 2 * 96
    assert len(json.loads((tmp_path / "s.json").read_text())) == 4


def test_eval_kfold(corpus_csv, capsys):
    code, out = run_json(capsys, ["eval-kfold", str(corpus_csv), "--folds", "3", *FAST])
    assert code == 0 and out["protocol"] == "kfold" and len(out["held_out"]) == 3


def test_sweep_and_bench(corpus_csv, capsys):
    code, out = run_json(capsys, ["sweep-delta", str(corpus_csv), "--grid", "0.1,0.9", *FAST])
    assert code == 0 and [r["delta_star"] for r in out["rows"]] == [0.1, 0.9]
    code, out = run_json(capsys, ["sweep-delta", str(corpus_csv), *FAST])
    assert len(out["grid"]) == 10 and out["grid"][0] == 0.05 and out["grid"][-1] == 0.95
    code, out = run_json(capsys, ["bench", str(corpus_csv), "--fractions", "0.5,1", *FAST])
    assert code == 0 and [r["fraction"] for r in out["rows"]] == [0.5, 1.0]


@pytest.mark.parametrize("argv", [
    ["eval-lodo", "X", "--delta-star", "1.01"],
    ["eval-lodo", "X", "--delta-star", "abc"],
    ["bench", "X", "--fractions", "a,b"],
    ["nonsense"],
])
def test_usage_errors_exit_2(argv, corpus_csv):
    argv = [str(corpus_csv) if a == "X" else a for a in argv]
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_invalid_config_exits_2(corpus_csv, capsys):
    assert main(["eval-lodo", str(corpus_csv), "--eta", "-1"]) == 2
    assert main(["sweep-delta", str(corpus_csv), "--grid", "0.5,1.5", *FAST]) == 2
    assert main(["bench", str(corpus_csv), "--fractions", "1.5", *FAST]) == 2
    assert "error:" in capsys.readouterr().err


def test_data_errors_exit_3(tmp_path, capsys):
    assert main(["eval-lodo", str(tmp_path / "missing.csv")]) == 3
    (tmp_path / "bad.csv").write_text("segment_id,domain,label,t,s1\n0,0,0,0,nan\n")
    assert main(["eval-kfold", str(tmp_path / "bad.csv")]) == 3
    assert "line" in capsys.readouterr().err
    (tmp_path / "junk.zip").write_bytes(b"not a zip")
    assert main(["predict", str(tmp_path / "junk.zip"), str(tmp_path / "bad.csv"), "--out", "x.csv"]) == 3
