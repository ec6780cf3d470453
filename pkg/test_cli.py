import json
import logging
from pathlib import Path

import pytest

from cameo.config import (
    ConfigError,
    check_output_dir,
    configure_logging,
    load_run_config,
    parse_config_text,
    render_config,
)
from cameoscan import main
from test_environments import get_mock_course_environment, write_environment

SMALL = ["--benign-accounts", "40", "--cameo-pairs", "5", "--items", "20", "--seed", "3"]


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    assert main(["synth", "--out", str(out)] + SMALL) == 0
    return out


def detect_into(corpus_dir: Path, out: Path, *extra) -> int:
    return main(["detect", "--events", str(corpus_dir / "events.jsonl"), "--roster", str(corpus_dir / "roster.csv"),
                 "--out", str(out), "--jobs", "1", *extra])


def test_synth_writes_corpus(corpus_dir):
    for name in ("events.jsonl", "roster.csv", "courses.csv", "truth.json"):
        assert (corpus_dir / name).is_file()
    truth = json.loads((corpus_dir / "truth.json").read_text())
    assert len(truth["planted"]) == 5


def test_synth_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / name)] + SMALL) == 0
    for artifact in ("events.jsonl", "roster.csv", "truth.json"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_detect_on_mock_environment(tmp_path, capsys):
    paths = write_environment(get_mock_course_environment("alternating_cheater"), tmp_path / "in")
    code = main(["detect", "--events", paths["events"], "--roster", paths["roster"], "--out", str(tmp_path / "out")])
    assert code == 0
    lines = (tmp_path / "out" / "detections.jsonl").read_text().splitlines()
    assert [json.loads(l)["harvester"] for l in lines] == ["curtis2"]
    record = json.loads(lines[0])
    assert record["filter_verdicts"] == {"bayesian": True, "cutoff": True, "certification": True,
                                         "shared_ip": True, "group_size": True}
    assert "CAMEO certificates: 1" in capsys.readouterr().out
    summary = (tmp_path / "out" / "course_summary.csv").read_text().splitlines()
    assert summary == ["course,certified_count,cameo_count,cameo_fraction", "c1,2,1,0.500000"]


def test_detect_is_byte_identical(corpus_dir, tmp_path):
    assert detect_into(corpus_dir, tmp_path / "one", "--write-candidates") == 0
    assert detect_into(corpus_dir, tmp_path / "two", "--write-candidates") == 0
    names = sorted(p.name for p in (tmp_path / "one").iterdir())
    assert "detections.jsonl" in names and "ip_groups.csv" in names
    for name in names:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_missing_roster_names_path(tmp_path, capsys):
    paths = write_environment(get_mock_course_environment("alternating_cheater"), tmp_path)
    missing = str(tmp_path / "absent-roster.csv")
    assert main(["detect", "--events", paths["events"], "--roster", missing, "--out", str(tmp_path)]) == 1
    assert "absent-roster.csv" in capsys.readouterr().out


def test_malformed_events_fail(tmp_path, capsys):
    paths = write_environment(get_mock_course_environment("alternating_cheater"), tmp_path)
    with open(paths["events"], "a") as f:
        f.write('{"account": "x", "course": "c1", "kind": "show_answer", "item": "p1", "ip": "10.0.0.1"}\n')
    assert main(["detect", "--events", paths["events"], "--roster", paths["roster"], "--out", str(tmp_path)]) == 1
    assert "missing time" in capsys.readouterr().out


def test_evaluate_perfect_detections(corpus_dir, tmp_path, capsys):
    assert detect_into(corpus_dir, tmp_path / "run") == 0
    capsys.readouterr()
    code = main(["evaluate", "--detections", str(tmp_path / "run" / "detections.jsonl"),
                 "--truth", str(corpus_dir / "truth.json"), "--out", str(tmp_path / "run")])
    assert code == 0
    assert "precision=1.0000 recall=1.0000" in capsys.readouterr().out
    report = json.loads((tmp_path / "run" / "evaluation.json").read_text())
    assert report["true_positives"] == 5


def test_sweep_rows_match_grid(corpus_dir, tmp_path):
    code = main(["sweep", "--events", str(corpus_dir / "events.jsonl"), "--roster", str(corpus_dir / "roster.csv"),
                 "--out", str(tmp_path), "--jobs", "1"])
    assert code == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "cutoff_seconds,cumulative,histogram_bin"
    assert len(rows) - 1 == 121
    assert rows[11].startswith("300,5,")


def test_report_from_saved_detections(corpus_dir, tmp_path, capsys):
    assert detect_into(corpus_dir, tmp_path) == 0
    code = main(["report", "--detections", str(tmp_path / "detections.jsonl"),
                 "--roster", str(corpus_dir / "roster.csv"), "--courses", str(corpus_dir / "courses.csv"),
                 "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "multicert.csv").read_text().splitlines()
    assert rows[0] == "min_certificates,earners,earners_with_cameo,fraction"
    assert len(rows) == 8
    assert (tmp_path / "prevention.csv").is_file()


def test_unknown_config_keys_are_listed(tmp_path, capsys):
    config = tmp_path / "run.conf"
    config.write_text("cutoff_seconds = 120\nfrobnicate = 1\nzap = 2\n")
    assert main(["detect", "--config", str(config)]) == 1
    assert "frobnicate, zap" in capsys.readouterr().out


def test_print_config_applies_precedence(tmp_path, capsys):
    config = tmp_path / "run.conf"
    config.write_text("# tuned\ncutoff_seconds = 120\nalpha = 1.0\n")
    assert main(["detect", "--config", str(config), "--alpha", "2", "--print-config"]) == 0
    printed = capsys.readouterr().out
    assert "cutoff_seconds = 120.0" in printed
    assert "alpha = 2.0" in printed
    assert "pi_threshold = 0.9" in printed


def test_rendered_config_loads_back(tmp_path):
    original = load_run_config(overrides={"cutoff_seconds": 90, "multicert_thresholds": "1,3", "events": "e.jsonl"})
    path = tmp_path / "echo.conf"
    path.write_text(render_config(original))
    assert load_run_config(str(path)) == original


def test_config_text_errors():
    assert parse_config_text("a = 1 # trailing\n\n# comment\n") == {"a": "1"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here")
    with pytest.raises(ConfigError, match="confidence"):
        load_run_config(overrides={"confidence": 1.5})


def test_log_level_from_environment(monkeypatch):
    monkeypatch.setenv("CAMEO_LOG", "debug")
    assert configure_logging() == logging.DEBUG
    assert configure_logging("bogus") == logging.WARNING
    assert configure_logging("error") == logging.ERROR


def test_output_path_that_is_a_file_fails_before_loading(tmp_path, capsys):
    paths = write_environment(get_mock_course_environment("alternating_cheater"), tmp_path / "in")
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory\n")
    code = main(["detect", "--events", paths["events"], "--roster", paths["roster"],
                 "--out", str(blocker), "--jobs", "1"])
    assert code == 1
    printed = capsys.readouterr().out
    assert "not a directory" in printed
    assert "Loading" not in printed
    assert blocker.read_text() == "not a directory\n"


def test_output_dir_checks(tmp_path):
    assert check_output_dir(str(tmp_path / "new" / "nested")) == tmp_path / "new" / "nested"
    (tmp_path / "file").write_text("")
    with pytest.raises(ConfigError, match="not a directory"):
        check_output_dir(str(tmp_path / "file" / "below"))
