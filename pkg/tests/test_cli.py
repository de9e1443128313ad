import json


from dbnclass import checks, cli
from dbnclass.strategies import MissingPrerequisiteError

from test_experiment import random_model, toy_config
from dbnclass.experiment import save_checkpoint


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_oracle_check_passes(capsys):
    code, out, _ = run(["oracle-check", "--seed", "1"], capsys)
    assert code == 0
    assert out.count("PASS") == 5


def test_oracle_check_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(checks, "run_checks", lambda seed: [("x", 1.0, 1e-6, False)])
    code, _, err = run(["oracle-check"], capsys)
    assert code == 6 and json.loads(err)["error"] == "oracle"


def test_train_report_eval_pretrain(tmp_path, capsys):
    cfg = str(toy_config(tmp_path, ["DBN_FFN", "FFN_DBNOPT"]))
    code, out, _ = run(["train", "--config", cfg, "--seeds", "3", "--finetune-epochs", "1"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "strategy\tmean_pct\tsd_pct\tseed_3"
    code, again, _ = run(["report", "--config", cfg, "--ddof", "0", "--out", str(tmp_path / "r0.tsv")], capsys)
    assert code == 0 and (tmp_path / "r0.tsv").read_text() == again
    ck = tmp_path / "out" / "checkpoints" / "DBN_FFN_seed3.ckpt"
    code, out, _ = run(["eval", "--config", cfg, "--checkpoint", str(ck), "--split", "valid"], capsys)
    assert code == 0
    res = json.loads(out)
    assert res["split"] == "valid" and 0 <= res["error"] <= 1
    code, out, _ = run(["pretrain", "--config", cfg, "--output-dir", "pre", "--pretrain-epochs", "1"], capsys)
    assert code == 0 and out.strip().endswith("pretrain_seed0.ckpt")


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"strategies": []}')
    code, _, err = run(["train", "--config", str(bad)], capsys)
    assert code == 2 and json.loads(err)["error"] == "config"
    code, _, err = run(["train", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 2


def test_data_error_exit_code(tmp_path, capsys):
    cfg = toy_config(tmp_path, ["DBN_FFN"])
    (tmp_path / "toy.csv").write_text("1,2,x\n")
    code, _, err = run(["train", "--config", str(cfg)], capsys)
    assert code == 3 and json.loads(err)["error"] == "data"


def test_checkpoint_error_exit_code(tmp_path, capsys):
    cfg = toy_config(tmp_path, ["DBN_FFN"])
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"DBNCKPT9")
    code, _, err = run(["eval", "--config", str(cfg), "--checkpoint", str(bad)], capsys)
    assert code == 4 and json.loads(err)["error"] == "checkpoint"


def test_error_categories():
    assert cli._category(MissingPrerequisiteError("x")) == "prerequisite"
    assert cli.EXIT_CODES["prerequisite"] == 5
    assert cli._category(RuntimeError("x")) == "runtime"


def test_eval_uses_checkpoint_dimensions(tmp_path, capsys):
    cfg = toy_config(tmp_path, ["DBN_FFN"])
    save_checkpoint(random_model(), tmp_path / "m.ckpt")  # 5 inputs, toy data has 6
    code, _, err = run(["eval", "--config", str(cfg), "--checkpoint", str(tmp_path / "m.ckpt")], capsys)
    assert code != 0 and "error" in json.loads(err)
