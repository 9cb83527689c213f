import json
import subprocess
import sys

import pytest

from cptree import cells
from cptree.cli import content_hash, main
from cptree.data import fixtures_dir

FIX = fixtures_dir()
SAMPLE_B = "(ROOT+X+NP (ADJP (JJ Effective) (CC but) (JJ too-tepid)) (NN biopic))"
SAMPLE_C = "(ROOT+X+NP (ADJP (JJ Effective) (@ADJP (CC but) (JJ too-tepid))) (NN biopic))"
SAMPLE_D = "(ROOT+X+NP ⊥ (NN (ADJP ⊥ (JJ (CC (JJ ⊥ (JJ Effective)) (CC but)) (JJ too-tepid))) (NN biopic)))"


def read_csv(path_or_text):
    text = path_or_text.read_text() if hasattr(path_or_text, "read_text") else path_or_text
    lines = text.strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:]]


# -- preprocess ------------------------------------------------------------------


@pytest.mark.parametrize("mode,expect", [("nonbinary", SAMPLE_B), ("binary", SAMPLE_C), ("treenet", SAMPLE_D)])
def test_preprocess_sample(tmp_path, mode, expect):
    assert main(["preprocess", "--input", str(FIX / "sample.ptb"), "--mode", mode, "--out", str(tmp_path)]) == 0
    assert (tmp_path / f"sample.{mode}.ptb").read_text(encoding="utf-8") == expect + "\n"
    stats = read_csv(tmp_path / "stats.csv")[0]
    assert stats["trees"] == "1" and stats["leaves"] == "4"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["inputs"] == {str(FIX / "sample.ptb"): content_hash(FIX / "sample.ptb")}


def test_preprocess_empty_file(tmp_path):
    src = tmp_path / "empty.ptb"
    src.write_text("")
    assert main(["preprocess", "--input", str(src), "--mode", "binary", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "empty.binary.ptb").read_text() == ""


def test_preprocess_corrupt_line(tmp_path, capsys):
    src = tmp_path / "bad.ptb"
    src.write_text("(A x)\n(A (B y)\n(C z)\n")
    assert main(["preprocess", "--input", str(src), "--mode", "binary", "--out", str(tmp_path / "o")]) == 2
    log = (tmp_path / "o" / "errors.log").read_text()
    assert ":2:" in log and "byte" in log
    assert len((tmp_path / "o" / "bad.binary.ptb").read_text().splitlines()) == 2


def test_preprocess_missing_input(tmp_path):
    assert main(["preprocess", "--input", str(tmp_path / "nope"), "--mode", "binary", "--out", str(tmp_path)]) == 2


def test_unknown_flag_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["gradcheck", "--variant", "treenet", "--colour", "red"])
    assert exc.value.code == 2


def test_content_hash_is_git_blob(tmp_path):
    f = tmp_path / "x"
    f.write_bytes(b"hello\n")
    assert content_hash(f) == "ce013625030ba8dba906f756967f9e9ca394464a"  # git hash-object


# -- gradcheck ---------------------------------------------------------------------


@pytest.mark.parametrize("variant", cells.VARIANTS)
def test_gradcheck_all_variants(variant, capsys):
    assert main(["gradcheck", "--variant", variant, "--d", "4", "--r", "3"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_minimal_dims():
    assert main(["gradcheck", "--variant", "invariant_cp", "--d", "1", "--r", "1"]) == 0


def test_gradcheck_fault_injection(capsys):
    assert main(["gradcheck", "--variant", "binary_cp", "--inject-fault"]) == 1
    assert "FAIL" in capsys.readouterr().out


# -- train / eval / grid -----------------------------------------------------------------


def overfit_config(tmp_path, **kw):
    cfg = {"dataset": "overfit", "variant": "child_sum", "d": 16, "n": 16, "bs": 1, "epochs": 200,
           "patience": 200, "dropout": 0.0, "stop_at_train": 1.0, "synthetic": {"n": 10}}
    cfg.update(kw)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_train_overfit_and_eval(tmp_path, capsys):
    cfg = overfit_config(tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "metrics.csv")
    best = [r for r in rows if r["epoch"] == "best" and r["split"] == "train"]
    assert best == [{"epoch": "best", "split": "train", "metric": "accuracy", "value": "1.0"}]
    for f in ("config.json", "manifest.json", "checkpoint/params.bin", "checkpoint/manifest.json"):
        assert (out / f).exists()
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out), "--split", "train"]) == 0
    printed = capsys.readouterr().out
    assert read_csv(printed) == best


def test_train_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"dataset": "overfit", "variant": "nope"}))
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    path.write_text("{not json")
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_eval_missing_checkpoint(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path)]) == 2


def test_grid_two_cells(tmp_path, capsys):
    spec = {"base": {"dataset": "overfit", "variant": "child_sum", "n": 4, "bs": 5, "epochs": 2,
                     "synthetic": {"n": 10}}, "grid": {"d": [3, 4]}, "repeats": 2}
    path = tmp_path / "g.json"
    path.write_text(json.dumps(spec))
    out = tmp_path / "grid"
    assert main(["grid", "--grids", str(path), "--out", str(out)]) == 0
    assert len(read_csv(out / "results.csv")) == 2
    row = read_csv(out / "table1.csv")[0]
    assert row["model"] == "Child-Sum LSTM" and "(" in row["overfit"]
    assert "2 grid cells, 2 repeats" in capsys.readouterr().out


def test_grid_needs_base(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"grid": {"d": [3]}}))
    assert main(["grid", "--grids", str(path), "--out", str(tmp_path / "o")]) == 2


# -- analyze / param-count ------------------------------------------------------------------------


def test_param_count_binary_cp(capsys):
    assert main(["param-count", "--variant", "binary_cp", "--d", "4", "--r", "3"]) == 0
    row = read_csv(capsys.readouterr().out)[0]
    assert row["composition"] == "230"
    assert main(["analyze", "--report", "param-count", "--variant", "invariant_cp", "--d", "4", "--r", "3"]) == 0
    assert read_csv(capsys.readouterr().out)[0]["composition"] == "113"


def test_param_count_requires_variant():
    assert main(["param-count", "--d", "4"]) == 2


@pytest.fixture(scope="module")
def sick_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sick")
    cfg = {"dataset": "sick-e", "variant": "child_sum", "d": 4, "s": 3, "epochs": 1,
           "data": str(FIX / "sick"), "glove": str(FIX / "glove.8d.txt")}
    (tmp / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp / "c.json"), "--out", str(tmp / "run")]) == 0
    return tmp / "run"


def test_analyze_length_buckets(sick_run, tmp_path):
    out = tmp_path / "b.csv"
    assert main(["analyze", "--checkpoint", str(sick_run), "--report", "length-buckets", "--split", "train",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    total = sum(int(r["count"]) for r in rows)
    correct = sum(int(r["correct"]) for r in rows)
    overall = [r for r in read_csv(sick_run / "metrics.csv") if r["epoch"] == "best" and r["split"] == "train"]
    assert abs(correct / total - float(overall[0]["value"])) < 1e-12


def test_analyze_node_probe(sick_run, capsys):
    assert main(["analyze", "--checkpoint", str(sick_run), "--report", "node-probe", "--split", "train"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert rows and all(abs(sum(float(r[f"p{j}"]) for j in range(3)) - 1) < 1e-12 for r in rows)
    assert main(["analyze", "--checkpoint", str(sick_run), "--report", "node-probe", "--pair", "999"]) == 2


def test_analyze_checkpoint_param_count(sick_run, capsys):
    assert main(["analyze", "--checkpoint", str(sick_run), "--report", "param-count"]) == 0
    row = read_csv(capsys.readouterr().out)[0]
    assert row["embedding"] == "0" and int(row["total"]) > 0


def test_analyze_wrong_task(tmp_path):
    cfg = overfit_config(tmp_path, epochs=1, stop_at_train=None)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")])
    assert main(["analyze", "--checkpoint", str(tmp_path / "run"), "--report", "length-buckets",
                 "--split", "train"]) == 2


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "cptree.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "kernels" in out.stdout
