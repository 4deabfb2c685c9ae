import json

import pytest

from mqka.cli import EXIT_CONFIG, EXIT_DETECTION, EXIT_FEASIBILITY, EXIT_OK, main


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_run_circle(capsys):
    code, body = run_json(capsys, ["run", "--topology", "circle", "--n", "4", "--key-len", "8", "--seed", "1"])
    assert code == EXIT_OK
    assert len(set(body["final_keys"].values())) == 1


def test_run_with_given_keys(capsys):
    code, body = run_json(capsys, ["run", "--topology", "complete", "--n", "3", "--key-len", "4",
                                   "--keys", "a,6,f"])
    assert code == EXIT_OK
    assert set(body["final_keys"].values()) == {"3"}


def test_run_tree(capsys):
    code, body = run_json(capsys, ["run", "--topology", "tree", "--n", "3", "--key-len", "4", "--seed", "2"])
    assert code == EXIT_OK and len(set(body["final_keys"].values())) == 1


def test_attack_circle_controlled(capsys):
    code, body = run_json(capsys, ["attack", "--topology", "circle", "--n", "6", "--colluders", "0,3",
                                   "--key-len", "8", "--expect", "5a"])
    assert code == EXIT_OK
    assert body["verdict"] == "controlled"
    assert set(body["final_keys"].values()) == {"5a"}


def test_attack_infeasible(capsys):
    code = main(["attack", "--topology", "circle", "--n", "6", "--colluders", "0,1", "--key-len", "4"])
    assert code == EXIT_FEASIBILITY
    assert "infeasible" in capsys.readouterr().err


def test_attack_forced_blind_flip(capsys):
    code = main(["attack", "--topology", "circle", "--n", "6", "--colluders", "0,1", "--key-len", "4",
                 "--force", "--fallback", "blind-flip"])
    assert code == EXIT_DETECTION


def test_attack_tree(capsys):
    code, body = run_json(capsys, ["attack", "--topology", "tree", "--n", "3", "--key-len", "2",
                                   "--shots", "6", "--expect", "0b10", "--seed", "4"])
    assert code == EXIT_OK
    # picking last never disturbs a GHZ shot, so the attack is never caught
    assert body["detections"] == [] and body["verdict"] != "aborted"


def test_feasibility(capsys):
    assert main(["feasibility", "--n", "9", "--colluders", "0,3,6"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[3, 3, 3]" in out and "feasible" in out


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"topology": "circle", "n": 5, "key_len": 4, "seed": 9}))
    code, body = run_json(capsys, ["run", "--config", str(cfg), "--n", "4"])
    assert code == EXIT_OK and body["n"] == 4 and body["key_len"] == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--topology", "circle", "--n", "4", "--key-len", "4", "--keys", "1,2"],
        ["run", "--topology", "circle", "--n", "2"],
        ["attack", "--topology", "circle", "--n", "4", "--key-len", "4"],
        ["run", "--config", "/nonexistent/cfg.json"],
    ],
)
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_unwritable_output(capsys):
    code = main(["run", "--topology", "circle", "--n", "3", "--key-len", "4", "--out", "/nonexistent/dir/x.json"])
    assert code == EXIT_CONFIG


def test_report_csv_to_file(tmp_path, capsys):
    out = tmp_path / "report.csv"
    assert main(["report", "--format", "csv", "--trials", "16", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[0] == "archetype,N,attack,verdict,detections,trials"
