import json
import shutil
import subprocess
import sys

import pytest

from predlearn.cli import main


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workdir(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "gen", "--seed", 2, "--n-train", 4, "--n-eval", 10, "--out-dir", tmp_path)
    assert code == 0 and out.strip().endswith("dataset.json")
    code, out, _ = run_cli(capsys, "run", "--dataset", tmp_path / "dataset.json", "--out-dir", tmp_path / "run")
    assert code == 0 and "generalization_accuracy\t1.0" in out
    return tmp_path


def test_learn_and_apply(workdir, capsys):
    code, out, _ = run_cli(capsys, "learn", "--dataset", workdir / "dataset.json", "--out", workdir / "n.json")
    assert code == 0
    names = [l.split("\t")[1] for l in out.splitlines()]
    assert sorted(n.split(".")[0] for n in names) == ["less", "more"]
    more = next(n for n in names if n.startswith("more"))
    ds = json.loads((workdir / "dataset.json").read_text())
    item = next(o for o in ds["objects"] if "more" in o["features"])
    (workdir / "item.json").write_text(json.dumps(item))
    code, out, _ = run_cli(capsys, "apply", "--net", workdir / "n.json", "--item", workdir / "item.json")
    assert code == 0
    rows = {r[1]: (float(r[2]), r[3]) for r in (l.split("\t") for l in out.strip().splitlines())}
    less = next(n for n in names if n.startswith("less"))
    assert rows[more][0] > rows[less][0]
    assert all((v == "bind") == (sc >= 0.8) for sc, v in rows.values())
    code, out, _ = run_cli(capsys, "apply", "--net", workdir / "n.json", "--item", workdir / "item.json",
                           "--predicate", more)
    assert code == 0 and out.split("\t")[1] == more
    code, _, err = run_cli(capsys, "apply", "--net", workdir / "n.json", "--item", workdir / "item.json",
                           "--predicate", "nope")
    assert code == 2 and "nope" in err


def test_decode_exported_trace(workdir, capsys):
    r = workdir / "run"
    code, out, _ = run_cli(capsys, "decode", "--trace", r / "trace.csv", "--network", r / "network.json")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 1 and len(lines[0].split("\t")[1].split()) == 2


def test_trace_roundtrips_through_decode(workdir, capsys, tmp_path):
    r = workdir / "run"
    code, _, _ = run_cli(capsys, "trace", "--network", r / "network.json", "--steps", 120,
                         "--out", tmp_path / "t.csv")
    assert code == 0
    code, out, _ = run_cli(capsys, "decode", "--trace", tmp_path / "t.csv", "--network", r / "network.json")
    assert code == 0 and len(out.strip().splitlines()) == 1


def test_exit_codes(tmp_path, capsys):
    assert run_cli(capsys, "learn", "--dataset", tmp_path / "missing.json", "--out", tmp_path / "x")[0] == 2
    (tmp_path / "bad.json").write_text("{")
    assert run_cli(capsys, "run", "--dataset", tmp_path / "bad.json", "--out-dir", tmp_path)[0] == 2
    (tmp_path / "dangling.json").write_text(json.dumps({"objects": [], "comparisons": [["a", "b"]]}))
    with pytest.warns(UserWarning):
        assert run_cli(capsys, "run", "--dataset", tmp_path / "dangling.json")[0] == 2
    (tmp_path / "net.json").write_text(json.dumps({"tokens": [{"id": "a", "layer": "P", "bank": "DRIVER"}]}))
    code, _, err = run_cli(capsys, "trace", "--network", tmp_path / "net.json", "--drive", "a=x",
                           "--out", tmp_path / "t.csv")
    assert code == 2 and "UNIT=VALUE" in err


def test_map_without_coactivity_is_runtime_error(tmp_path, capsys):
    net = {"tokens": [{"id": "a", "layer": "PO_OBJ", "bank": "DRIVER"},
                      {"id": "b", "layer": "PO_OBJ", "bank": "RECIPIENT"}]}
    (tmp_path / "net.json").write_text(json.dumps(net))
    (tmp_path / "t.csv").write_text("t,unit_id,activation\n0,a,1.0\n0,b,0.0\n")
    code, _, err = run_cli(capsys, "map", "--trace", tmp_path / "t.csv", "--network", tmp_path / "net.json")
    assert code == 1 and "coactivity" in err


def test_config_flag(tmp_path, capsys):
    (tmp_path / "c.toml").write_text(f'seed = 5\nout_dir = "{tmp_path / "o"}"\n')
    assert run_cli(capsys, "gen", "--config", tmp_path / "c.toml", "--n-train", 1, "--n-eval", 1)[0] == 0
    assert (tmp_path / "o" / "dataset.json").exists()


@pytest.mark.skipif(shutil.which("predlearn") is None, reason="console script not installed")
def test_console_script(tmp_path):
    p = subprocess.run(["predlearn", "gen", "--n-train", "1", "--n-eval", "1", "--out-dir", str(tmp_path)],
                       capture_output=True, text=True)
    assert p.returncode == 0
    p = subprocess.run([sys.executable, "-m", "predlearn.cli", "decode", "--trace", "x", "--network", "y"],
                       capture_output=True, text=True)
    assert p.returncode == 2
