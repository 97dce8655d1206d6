import json

import pytest

from peermatch.cli import main
from peermatch.corpus import fixture_corpus_path


def test_ingest_fixture(tmp_path, capsys):
    rc = main(["ingest", str(fixture_corpus_path()), "--out", str(tmp_path)])
    assert rc == 0
    assert "112 exercises" in capsys.readouterr().out
    summary = json.loads((tmp_path / "summary.json").read_text("utf-8"))
    assert summary["domains"]["logical"] == 26
    assert summary["categories"] == {"STEM": 40, "Social Science": 35, "Humanities": 37}
    assert (tmp_path / "corpus.csv").exists()


def test_ingest_bad_path(tmp_path, capsys):
    rc = main(["ingest", str(tmp_path / "missing"), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_profile_synthetic(tmp_path, capsys):
    rc = main(["profile", "synthetic", "--repeats", "3", "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "difficulty.csv").read_text("utf-8").strip().splitlines()
    assert lines[0] == "exercise_id,mean_accuracy,n_repeats"
    assert len(lines) == 61
    assert all(line.endswith(",3") for line in lines[1:])
    assert "fall below" in capsys.readouterr().out


def _variant_config(tmp_path, **extra):
    payload = {
        "corpus": "synthetic",
        "seed": 5,
        "variant": {
            "name": "solo",
            "role_setting": True,
            "co_learning": False,
        },
    }
    payload.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload), "utf-8")
    return path


def test_simulate_variant(tmp_path, capsys):
    cfg = _variant_config(tmp_path)
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "solo Total: mean=" in out
    assert (tmp_path / "out" / "transcripts" / "solo.jsonl").exists()


def test_simulate_unknown_key_rejected(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"corpus": "synthetic", "variant": {"name": "x", "role_setting": True, "co_learning": False, "surprise": 1}}), "utf-8")
    rc = main(["simulate", "--config", str(path)])
    assert rc == 2
    assert "surprise" in capsys.readouterr().err


def test_suite_config_unknown_top_level_key(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"corpus": "synthetic", "extra": True}), "utf-8")
    rc = main(["suite", "--config", str(path), "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "extra" in capsys.readouterr().err


def _suite_config(tmp_path):
    payload = {
        "corpus": "synthetic",
        "seed": 4,
        "train_domains": ["number_theory", "market_research", "modern_poetry"],
        "variants": [
            {"name": "baseline", "role_setting": False, "co_learning": False},
            {"name": "solo", "role_setting": True, "co_learning": False},
            {"name": "random-pair", "role_setting": True, "co_learning": True},
        ],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(payload), "utf-8")
    return path


def test_suite_and_report_round_trip(tmp_path, capsys):
    cfg = _suite_config(tmp_path)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["suite", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["suite", "--config", str(cfg), "--out", str(out2)]) == 0
    report_names = ["category_table.csv", "category_table.txt", "component_table.csv", "component_table.txt", "results.json"]
    for name in report_names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    stdout = capsys.readouterr().out
    assert "baseline" in stdout and "random-pair" in stdout

    before = {n: (out1 / n).read_bytes() for n in report_names}
    assert main(["report", "--out", str(out1)]) == 0
    for name in ("category_table.csv", "component_table.csv"):
        assert (out1 / name).read_bytes() == before[name]


def test_suite_seed_flag_overrides_config(tmp_path):
    cfg = _suite_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["suite", "--config", str(cfg), "--seed", "77", "--out", str(out1)]) == 0
    assert main(["suite", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "results.json").read_bytes() != (out2 / "results.json").read_bytes()
    results = json.loads((out1 / "results.json").read_text("utf-8"))
    assert results["variants"][0]["config"]["seed"] == 77


def test_suite_defaults_without_config(tmp_path):
    # default 7-variant suite; keep it small by seeding and trusting runtime
    rc = main(["suite", "--seed", "2", "--backend", "mock", "--out", str(tmp_path / "out")])
    assert rc == 0
    results = json.loads((tmp_path / "out" / "results.json").read_text("utf-8"))
    assert [v["config"]["name"] for v in results["variants"]] == [
        "baseline", "solo", "random-pair", "gp-global", "gp-local", "nn-global", "nn-local",
    ]


def test_missing_subcommand_usage_error(capsys):
    with pytest.raises(SystemExit):
        main([])
