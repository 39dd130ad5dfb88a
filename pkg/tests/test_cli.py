import json
import subprocess
import sys

import numpy as np
import pytest

from koopctl import cli, pole
from koopctl.policy import KoopmanModel, KoopmanPolicy, save_checkpoint

TINY = ["--set", "train.epochs_max=2", "--set", "train.T=30", "--set", "sn.epochs=1",
        "--set", "sn.n_sequences=4", "--set", "eval.runs=2", "--set", "eval.repeats=1",
        "--set", "train.validation_rollouts=2", "--set", "train.batch_size=2"]


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_then_dmd(tmp_path, capsys):
    csv = tmp_path / "t.csv"
    code, _, _ = run(["simulate", "--system", "duffing", "--T", "80", "--seed", "2", "--out", str(csv),
                      "--svg", str(tmp_path / "t.svg")], capsys)
    assert code == 0 and csv.read_text().startswith("t,y1,y2,u1\n")
    assert (tmp_path / "t.svg").exists()
    code, out, _ = run(["dmd", str(csv)], capsys)
    vals = json.loads(out)
    assert code == 0 and len(vals) == 2 and set(vals[0]) == {"re", "im", "abs", "arg"}


def test_simulate_to_stdout(capsys):
    code, out, _ = run(["simulate", "--T", "3"], capsys)
    assert code == 0 and len(out.splitlines()) == 4


def test_train_evaluate_report(tmp_path, capsys):
    d = tmp_path / "ours"
    code, out, _ = run(["train", "--out-dir", str(d)] + TINY, capsys)
    assert code == 0
    ckpt = json.loads(out)["checkpoint"]
    code, out, _ = run(["evaluate", "--checkpoint", ckpt, "--out", str(d / "report.json")] + TINY, capsys)
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["method"] == "ours" and rep["repeats"] == 1
    code, out, _ = run(["report", str(tmp_path), "--csv", str(tmp_path / "s.csv")], capsys)
    assert code == 0 and "| vdp |" in out
    assert (tmp_path / "s.csv").read_text().startswith("system,abs,arg,method,mean_error,stderr")


@pytest.mark.parametrize("method", ["sl", "sn", "rl"])
def test_baseline(tmp_path, capsys, method):
    code, out, _ = run(["baseline", "--method", method, "--out-dir", str(tmp_path)] + TINY, capsys)
    assert code == 0
    doc = json.loads((tmp_path / "checkpoint.json").read_text())
    assert doc["kind"] == {"sl": "linear", "sn": "koopman", "rl": "mlp"}[method]
    if method == "sn":
        assert "decoder" in doc


def test_evaluate_hash_mismatch_is_config_error(tmp_path, capsys):
    run(["baseline", "--method", "sl", "--out-dir", str(tmp_path)] + TINY, capsys)
    code, _, err = run(["evaluate", "--checkpoint", str(tmp_path / "checkpoint.json"),
                        "--config", str(tmp_path / "config.json"), "--set", "train.lr=0.5"], capsys)
    assert code == 2 and "hash" in err


def test_run_and_dry_run(tmp_path, capsys):
    out_dir = tmp_path / "exp"
    code, out, _ = run(["run", "--dry-run", "--output-dir", str(out_dir)] + TINY, capsys)
    assert code == 0 and json.loads(out)["valid"] and not out_dir.exists()
    code, out, _ = run(["run", "--method", "sl", "--output-dir", str(out_dir)] + TINY, capsys)
    assert code == 0 and (out_dir / "report.json").exists()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "fhn", "method": "sl", "eval.runs": 2, "eval.repeats": 1,
                               "sn.n_sequences": 4, "output_dir": str(tmp_path / "o")}))
    code, _, _ = run(["run", "--config", str(cfg)], capsys)
    assert code == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["system"] == "fhn"


@pytest.mark.parametrize("argv", [
    ["run", "--dry-run", "--set", "target.abs=2"],
    ["run", "--dry-run", "--set", "nope=1"],
    ["run", "--dry-run", "--system", "lorenz"],
])
def test_config_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and err.startswith("koopctl:")


def test_report_without_inputs_exit_2(tmp_path, capsys):
    assert run(["report", str(tmp_path)], capsys)[0] == 2


def test_bad_config_file_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["run", "--dry-run", "--config", str(bad)], capsys)[0] == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    target = pole.TargetSpectrum.from_polar(1.0, 0.1)
    policy = KoopmanPolicy(KoopmanModel(np.eye(2), np.array([[1.0], [0.0]])), target)
    save_checkpoint(policy, tmp_path / "c.json", "vdp")
    code, _, err = run(["evaluate", "--checkpoint", str(tmp_path / "c.json")], capsys)
    assert code == 3 and "numeric" in err


def test_io_failure_exit_4(tmp_path, capsys):
    assert run(["dmd", str(tmp_path / "missing.csv")], capsys)[0] == 4
    blocker = tmp_path / "f"
    blocker.write_text("")
    code, _, _ = run(["run", "--method", "sl", "--output-dir", str(blocker / "x")] + TINY, capsys)
    assert code == 4


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "koopctl.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("simulate", "dmd", "train", "baseline", "evaluate", "report"):
        assert sub in res.stdout
