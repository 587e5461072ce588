import json

from divrr.cli import main


def test_gen_run_report_trace(tmp_path, capsys):
    suite = tmp_path / "suite"
    assert main(["gen", "--seed", "4", "--out", str(suite), "--questions", "7"]) == 0
    assert (suite / "suite.json").exists()
    exp = tmp_path / "exp.json"
    exp.write_text(json.dumps({"suite": "suite", "seeds": [0]}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(exp), "--out", str(out), "--variant", "base", "--variant", "full"]) == 0
    capsys.readouterr()

    assert main(["report", "--in", str(out), "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "variant,backbone,split,accuracy_pct,mem,sensing_steps,episodes"
    assert len(text.splitlines()) == 1 + 2 * 3

    assert main(["report", "--in", str(out), "--format", "json"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 2

    first = json.loads((out / "episodes.jsonl").read_text().splitlines()[0])["episode_id"]
    assert main(["trace", "--in", str(out), "--episode", first]) == 0
    assert first in capsys.readouterr().out
    assert main(["trace", "--in", str(out), "--episode", "nope"]) == 1


def test_bad_config_reports_error(tmp_path, capsys):
    exp = tmp_path / "exp.json"
    exp.write_text(json.dumps({"suite": "x", "seedz": [0]}))
    assert main(["run", "--config", str(exp), "--out", str(tmp_path / "o")]) == 2
    assert "seedz" in capsys.readouterr().err
