import json

import pytest

from streetdyn.cli import main

SMALL_TD3 = {"start_steps": 100, "batch_size": 32, "episode_len": 30, "actor_hidden": [16], "critic_hidden": [16]}


@pytest.fixture(scope="module")
def overtake_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan") / "overtake"
    assert main(["plan", "--scenario", "overtake", "--out", str(out)]) == 0
    return out


def table_rows(text):
    lines = [l for l in text.splitlines() if l.strip()]
    return [l.split() for l in lines[2:]]


def test_plan_scenario(overtake_bundle, capsys):
    plan = json.loads((overtake_bundle / "plan.json").read_text())
    assert plan["schedule"] == ["1", "0"]
    assert plan["oracle"]["agent_list"] == {"0": "car_a", "1": "car_b"}
    assert sorted(p.name for p in (overtake_bundle / "trajectories").iterdir()) == ["0.csv", "1.csv"]


def test_plan_missing_fixture(tmp_path, capsys):
    empty = tmp_path / "fx"
    empty.mkdir()
    code = main(["plan", "A car turns left.", "--map", "intersection", "--fixtures", str(empty),
                 "--out", str(tmp_path / "o")])
    assert code != 0
    assert "oracle.json" in capsys.readouterr().err


def test_plan_remote_without_key(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("STREETDYN_LLM_API_KEY", raising=False)
    code = main(["plan", "A car turns left.", "--map", "intersection", "--llm", "remote", "--out", str(tmp_path)])
    assert code == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "plan.json").exists()


def test_simulate_pursuit(overtake_bundle, tmp_path, capsys):
    assert main(["simulate", str(overtake_bundle), "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in (tmp_path / "traces").iterdir()) == ["0.csv", "1.csv"]
    assert (tmp_path / "metrics.csv").exists()
    assert "collision_rate 0.0000" in capsys.readouterr().out


def test_eval_trace_bundle(overtake_bundle, tmp_path, capsys):
    sim = tmp_path / "sim"
    main(["simulate", str(overtake_bundle), "--out", str(sim)])
    capsys.readouterr()
    assert main(["eval", "--traces", str(sim), "--plans", str(overtake_bundle), "--out", str(tmp_path / "e")]) == 0
    assert [r[0] for r in table_rows(capsys.readouterr().out)] == ["0", "1"]


def test_train_zero_steps(tmp_path):
    assert main(["train", "--steps", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "train_log.csv").read_text() == "episode,steps,return,pos_err\n"
    assert (tmp_path / "policy.bin").stat().st_size > 0
    assert json.loads((tmp_path / "td3_config.json").read_text())["total_steps"] == 0
    rows = (tmp_path / "paired_eval.csv").read_text().splitlines()
    assert len(rows) == 9


def test_train_seed_determinism(tmp_path):
    cfg = tmp_path / "td3.json"
    cfg.write_text(json.dumps(SMALL_TD3))
    for run in ("a", "b"):
        assert main(["train", "--config", str(cfg), "--steps", "300", "--seed", "7", "--out", str(tmp_path / run)]) == 0
    assert (tmp_path / "a" / "policy.bin").read_bytes() == (tmp_path / "b" / "policy.bin").read_bytes()
    assert (tmp_path / "a" / "train_log.csv").read_text() == (tmp_path / "b" / "train_log.csv").read_text()


def test_train_bad_config(tmp_path, capsys):
    cfg = tmp_path / "td3.json"
    cfg.write_text(json.dumps({"gama": 0.9}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "gama" in capsys.readouterr().err


def test_eval_pursuit_table(tmp_path, capsys):
    assert main(["eval", "--controller", "pure_pursuit", "--out", str(tmp_path)]) == 0
    rows = table_rows(capsys.readouterr().out)
    assert [float(r[0]) for r in rows] == [0.0, 5.0, 10.0, 20.0]
    e = [float(r[1]) for r in rows]
    assert e == sorted(e)
    assert len(list((tmp_path / "plots").glob("*.svg"))) == 12


def test_eval_robustness(tmp_path, capsys):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"shapes": ["circle"], "speeds": [10]}))
    assert main(["eval", "--suite", str(suite), "--robustness", "--seeds", "2", "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "sigma" in out
    assert (tmp_path / "o" / "robustness.csv").read_text().count("\n") == 4


def test_eval_empty_suite(tmp_path, capsys):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"shapes": []}))
    assert main(["eval", "--suite", str(suite), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "errors.csv").read_text() == "speed,e_pos,e_vel\n"


def test_corrupted_checkpoint(tmp_path, capsys):
    ckpt = tmp_path / "policy.bin"
    ckpt.write_bytes(b"SDYNPOL\0" + b"\x01\x00\x00\x00\x05\x00\x00\x00{bad}")
    assert main(["eval", "--checkpoint", str(ckpt), "--out", str(tmp_path / "o")]) == 1
    assert "checkpoint" in capsys.readouterr().err


def test_unknown_controller(tmp_path, capsys):
    assert main(["eval", "--controller", "magic", "--out", str(tmp_path)]) == 1
