"""Command-line stages: wiring, outputs, exit codes, option precedence."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import pytest

from drugpulse.cli import main
from drugpulse.lexicon import DrugId
from drugpulse.records import REJECTION_REASONS

FAKE_SERVER = str(Path(__file__).parent / "fake_sidecar.py")


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f]


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One full stage-by-stage run over the synthetic fixture."""
    fix = tmp_path_factory.mktemp("fixture")
    work = tmp_path_factory.mktemp("work")
    assert main(["synth", "--out-dir", str(fix), "--seed", "7"]) == 0
    steps = [
        ["ingest", "--in", str(fix / "corpus.jsonl"), "--out-dir", str(work)],
        ["match", "--in", str(work / "filtered.jsonl"), "--out-dir", str(work)],
        ["geo", "--in", str(work / "matched.jsonl"), "--out-dir", str(work)],
        ["stance", "--in", str(work / "geotagged.jsonl"), "--out-dir", str(work)],
        ["trend", "--in", str(work / "geotagged.jsonl"),
         "--cases", str(fix / "cases.csv"), "--out-dir", str(work)],
        ["cluster", "--in", str(work / "geotagged.jsonl"),
         "--stance", str(work / "stance.csv"), "--out-dir", str(work)],
        ["demo", "--in", str(work / "geotagged.jsonl"),
         "--roster", str(fix / "roster.csv"), "--m3", str(fix / "m3.csv"),
         "--out-dir", str(work)],
        ["stats", "--in", str(work / "geotagged.jsonl"),
         "--stance", str(work / "stance.csv"),
         "--profiles", str(work / "profiles.csv"), "--out-dir", str(work)],
        ["ner", "--in", str(work / "geotagged.jsonl"), "--out-dir", str(work)],
        ["report", "--stance", str(work / "stance.csv"),
         "--state-stance", str(work / "state_stance.csv"), "--out-dir", str(work)],
    ]
    for argv in steps:
        assert main(argv) == 0, argv[0]
    truth = json.loads((fix / "truth.json").read_text())
    return fix, work, truth


class TestStageOutputs:
    def test_ingest(self, pipeline):
        fix, work, truth = pipeline
        rows = _read_csv(work / "rejections.csv")
        assert [r["reason"] for r in rows] == list(REJECTION_REASONS)
        got = {r["reason"]: int(r["count"]) for r in rows}
        assert got == truth["rejections"]
        kept = len(_read_jsonl(work / "filtered.jsonl"))
        assert kept + sum(got.values()) == truth["n_lines"]

    def test_match(self, pipeline):
        _, work, truth = pipeline
        stats = {r["metric"]: int(r["count"]) for r in _read_csv(work / "match_stats.csv")}
        assert stats["excluded_multi"] == truth["excluded_multi"]
        assert stats["no_mention"] == truth["no_mention"]
        matched = _read_jsonl(work / "matched.jsonl")
        assert len(matched) == stats["matched"]
        drugs = {d.value for d in DrugId}
        assert all(o["drug"] in drugs for o in matched)

    def test_geo(self, pipeline):
        _, work, truth = pipeline
        stats = {r["metric"]: int(r["count"]) for r in _read_csv(work / "geo_stats.csv")}
        assert stats["unresolved"] == truth["geo_unresolved"]
        tagged = _read_jsonl(work / "geotagged.jsonl")
        assert len(tagged) == stats["resolved_gps"] + stats["resolved_profile"]
        assert all(o["geo_source"] in ("gps", "profile") for o in tagged)
        assert all(len(o["state"]) == 2 for o in tagged)

    def test_stance(self, pipeline):
        _, work, _ = pipeline
        rows = _read_csv(work / "stance.csv")
        assert len(rows) == len(_read_jsonl(work / "geotagged.jsonl"))
        numeric = {"Negative": "-1", "Neutral": "0", "Positive": "1"}
        assert all(r["numeric"] == numeric[r["stance"]] for r in rows)

    def test_trend(self, pipeline):
        _, work, truth = pipeline
        rows = _read_csv(work / "trend.csv")
        by_cell = {(r["drug"], r["week_start"]): int(r["tweet_count"]) for r in rows}
        for drug, weeks in truth["weekly_counts"].items():
            for week, n in weeks.items():
                assert by_cell[(drug, week)] == n
        assert (work / "trend.svg").read_text().startswith("<svg")

    def test_cluster(self, pipeline):
        _, work, _ = pipeline
        rows = _read_csv(work / "clusters.csv")
        assert len(rows) == len(_read_jsonl(work / "geotagged.jsonl"))
        reps = _read_csv(work / "representatives.csv")
        assert reps, "no representatives written"
        for r in reps:
            assert int(r["rank"]) >= 1
            float(r["dist"])

    def test_demo(self, pipeline):
        _, work, _ = pipeline
        rows = _read_csv(work / "profiles.csv")
        ids = [r["user_id"] for r in rows]
        assert ids == sorted(ids) and len(ids) == len(set(ids))
        assert all(r["partisanship"] in ("Left", "Neutral", "Right") for r in rows)

    def test_stats(self, pipeline):
        _, work, truth = pipeline
        chisq = _read_csv(work / "chisq.csv")
        groupings = {(r["drug"], r["grouping"]) for r in chisq}
        assert ("all", "partisanship") in groupings
        assert ("all", "healthcare") in groupings
        states = _read_csv(work / "state_stance.csv")
        got = {(r["state"], int(r["wave"])): int(r["n"]) for r in states}
        want = {(c["state"], c["wave"]): c["n"] for c in truth["state_cells"]}
        assert got == want

    def test_ner(self, pipeline):
        _, work, _ = pipeline
        rows = _read_csv(work / "entities.csv")
        assert rows, "no entities emitted"
        assert set(_read_csv(work / "entities.csv")[0]) == {
            "drug", "wave", "class", "term", "count"
        }

    def test_report(self, pipeline):
        _, work, _ = pipeline
        for name in ("stance_shares.svg", "state_grid.svg"):
            assert (work / name).read_text().startswith("<svg")


class TestExitCodes:
    def test_missing_input_is_contract_error(self, tmp_path, capsys):
        rc = main(["match", "--in", str(tmp_path / "nope.jsonl"), "--out-dir", str(tmp_path)])
        assert rc == 2
        assert "pulse:" in capsys.readouterr().err

    def test_run_config_missing_keys(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("corpus = x.jsonl\n", encoding="utf-8")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_sidecar_failure_is_transport_error(self, pipeline, tmp_path, capsys):
        _, work, _ = pipeline
        rc = main([
            "stance", "--in", str(work / "geotagged.jsonl"), "--out-dir", str(tmp_path),
            "--classifier", "sidecar",
            "--sidecar-cmd", f"{sys.executable} {FAKE_SERVER} --no-handshake",
        ])
        assert rc == 3
        assert "transport error" in capsys.readouterr().err

    def test_bad_config_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just words\n", encoding="utf-8")
        assert main(["run", "--config", str(cfg)]) == 2


class TestOptionPrecedence:
    def test_flag_beats_config(self, tmp_path):
        cfg = tmp_path / "synth.cfg"
        cfg.write_text("tweets = 30\nseed = 5\n", encoding="utf-8")
        d1, d2 = tmp_path / "d1", tmp_path / "d2"
        assert main(["synth", "--config", str(cfg), "--out-dir", str(d1)]) == 0
        assert main(["synth", "--config", str(cfg), "--tweets", "40", "--out-dir", str(d2)]) == 0
        t1 = json.loads((d1 / "truth.json").read_text())
        t2 = json.loads((d2 / "truth.json").read_text())
        assert t1["n_clean"] == 30
        assert t2["n_clean"] == 40
        assert t1["seed"] == 5 and t2["seed"] == 5

    def test_threads_env_fallback(self, pipeline, tmp_path, monkeypatch):
        _, work, _ = pipeline
        monkeypatch.setenv("PULSE_THREADS", "3")
        out = tmp_path / "threaded"
        rc = main(["match", "--in", str(work / "filtered.jsonl"), "--out-dir", str(out)])
        assert rc == 0
        assert (out / "matched.jsonl").read_bytes() == (work / "matched.jsonl").read_bytes()
        assert (out / "match_stats.csv").read_bytes() == (work / "match_stats.csv").read_bytes()

    def test_bad_threads_env(self, pipeline, tmp_path, monkeypatch):
        _, work, _ = pipeline
        monkeypatch.setenv("PULSE_THREADS", "zero")
        rc = main(["match", "--in", str(work / "filtered.jsonl"), "--out-dir", str(tmp_path)])
        assert rc == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "pulse" in capsys.readouterr().out


def test_run_subcommand_matches_stagewise(pipeline, tmp_path):
    fix, work, _ = pipeline
    out = tmp_path / "runout"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"corpus = {fix / 'corpus.jsonl'}\n"
        f"cases = {fix / 'cases.csv'}\n"
        f"roster = {fix / 'roster.csv'}\n"
        f"m3 = {fix / 'm3.csv'}\n"
        f"out_dir = {out}\n",
        encoding="utf-8",
    )
    assert main(["run", "--config", str(cfg)]) == 0
    for name in ("stance.csv", "trend.csv", "chisq.csv", "state_stance.csv"):
        assert (out / name).read_bytes() == (work / name).read_bytes(), name


def test_sample_eval(tmp_path, capsys):
    ds = tmp_path / "ds.csv"
    rows = ["text,label"]
    for i in range(20):
        rows.append(f"this works great {i},2")
        rows.append(f"total scam number {i},0")
    ds.write_text("\n".join(rows) + "\n", encoding="utf-8")
    out = tmp_path / "metrics.csv"
    rc = main(["sample-eval", "--dataset", str(ds), "--out", str(out),
               "--size", "10", "--seed", "3"])
    assert rc == 0
    metrics = _read_csv(out)
    assert [r["class"] for r in metrics][:3] == ["Negative", "Neutral", "Positive"]
    assert "accuracy" in capsys.readouterr().out
