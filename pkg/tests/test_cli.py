import json
import shutil
import subprocess

import pytest

from persuade_sdg.cli import COMMANDS, main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def pool(tmp_path):
    path = tmp_path / "pool.json"
    path.write_text(json.dumps({"agents": [{"id": "first", "script": "first"},
                                           {"id": "last", "script": "last"},
                                           {"id": "rand", "framework": "random"}]}))
    return path


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_help(command, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    assert "--config" in capsys.readouterr().out


def test_unknown_game_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["play", "--game", "chess"])
    assert info.value.code == 2


def test_unknown_game_in_config(tmp_path, pool, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"game": "chess", "agents": str(pool)}))
    code, _, err = run(["play", "--config", cfg], capsys)
    assert code == 2 and "chess" in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    code, _, err = run(["extract", "--config", cfg], capsys)
    assert code == 2 and "colour" in err


def test_missing_artifact(tmp_path, capsys):
    code, _, err = run(["extract", "--logs", tmp_path / "none.jsonl", "--out", tmp_path / "d.jsonl"], capsys)
    assert code == 1 and "not found" in err


def test_missing_required_flag(capsys):
    code, _, _ = run(["selfplay", "--game", "avalon"], capsys)
    assert code == 2


def test_play_writes_one_log(tmp_path, pool, capsys):
    out = tmp_path / "g.jsonl"
    code, stdout, _ = run(["play", "--game", "avalon", "--agents", pool, "--seed", 3, "--out", out], capsys)
    assert code == 0 and "avalon seed 3" in stdout
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["seed"] == 3
    meta = json.loads((tmp_path / "g.jsonl.meta.json").read_text())
    assert meta["command"] == "play" and meta["config"]["seed"] == 3


def test_play_is_byte_identical(tmp_path, pool, capsys):
    for name in ("a", "b"):
        assert run(["play", "--game", "werewolf", "--agents", pool, "--seed", 5,
                    "--out", tmp_path / f"{name}.jsonl"], capsys)[0] == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_flags_override_config(tmp_path, pool, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"play": {"game": "onuw", "agents": str(pool), "seed": 1}}))
    out = tmp_path / "g.jsonl"
    assert run(["play", "--config", cfg, "--seed", 9, "--out", out], capsys)[0] == 0
    log = json.loads(out.read_text())
    assert log["game"] == "onuw" and log["seed"] == 9
    # config beats defaults
    assert run(["play", "--config", cfg, "--out", out], capsys)[0] == 0
    assert json.loads(out.read_text())["seed"] == 1


def test_eval_report(tmp_path, pool, capsys):
    out = tmp_path / "r.json"
    code, stdout, _ = run(["eval", "--game", "werewolf", "--pool", pool, "--matches", 6, "--out", out], capsys)
    assert code == 0 and "Team Village" in stdout
    doc = json.loads(out.read_text())
    assert doc["matches"] + doc["aborted"] == 6


def test_team_eval(tmp_path, pool, capsys):
    code, stdout, _ = run(["eval", "--game", "avalon", "--pool", pool, "--matches", 4,
                           "--variant", "rand", "--opponent", "first", "--side", "good"], capsys)
    assert code == 0 and "rand on good" in stdout
    code, _, _ = run(["eval", "--game", "avalon", "--pool", pool, "--variant", "rand"], capsys)
    assert code == 2


@pytest.fixture
def pipeline(tmp_path, capsys):
    logs, data, meas = tmp_path / "logs.jsonl", tmp_path / "data.jsonl", tmp_path / "m.json"
    assert run(["selfplay", "--game", "werewolf", "--count", 3, "--out", logs], capsys)[0] == 0
    assert run(["extract", "--logs", logs, "--sample", 12, "--out", data], capsys)[0] == 0
    assert run(["toy-init", "--dataset", data, "--vocab-size", 40, "--scale", 0.5, "--out", meas], capsys)[0] == 0
    return tmp_path, data, meas


def test_measure_prints_one_float(pipeline, capsys):
    _, data, meas = pipeline
    code, out, _ = run(["measure", "--instance", data, "--index", 2, "--candidate", "I agree",
                        "--measurer", meas], capsys)
    assert code == 0
    float(out.strip())
    code, out, _ = run(["measure", "--instance", data, "--candidate", "I agree", "--measurer", meas,
                        "--mode", "all"], capsys)
    vals = dict(line.split("\t") for line in out.strip().splitlines())
    assert float(vals["full"]) == float(vals["positive"]) + float(vals["negative"])


def test_measure_bad_index(pipeline, capsys):
    _, data, meas = pipeline
    code, _, _ = run(["measure", "--instance", data, "--index", 999, "--candidate", "x", "--measurer", meas], capsys)
    assert code == 2


def test_extract_too_many(pipeline, capsys):
    tmp, _, _ = pipeline
    code, _, err = run(["extract", "--logs", tmp / "logs.jsonl", "--sample", 10_000,
                        "--out", tmp / "x.jsonl"], capsys)
    assert code == 1 and "SampleExceedsPool" in err


def test_train_writes_checkpoint_and_metrics(pipeline, capsys):
    tmp, data, meas = pipeline
    out, metrics = tmp / "r.json", tmp / "metrics.jsonl"
    code, stdout, _ = run(["train", "--dataset", data, "--measurer", meas, "--out", out, "--metrics", metrics,
                           "--max-steps", 3, "--lr", 0.2, "--n", 4, "--max-tokens", 6], capsys)
    assert code == 0 and "trained 3 step(s)" in stdout
    assert len(metrics.read_text().splitlines()) == 3
    ck = json.loads(out.read_text())
    assert ck["config"]["trainer"]["n"] == 4


@pytest.mark.skipif(shutil.which("sdg") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["sdg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "selfplay" in proc.stdout
