"""Command-line behavior: stage commands, overrides, eval scoring, errors."""

from __future__ import annotations

import json

import pytest

from conftest import write_workspace
from kultur.cli import build_parser, main


def run_cli(*argv):
    return main(list(argv))


class TestParser:
    def test_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_requires_config(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["select"])

    def test_replay_and_record_conflict(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(
                ["refine", "--config", "c.json", "--replay", "--record"]
            )

    def test_replay_store_argument_is_optional(self):
        args = build_parser().parse_args(["refine", "--config", "c.json", "--replay"])
        assert args.replay == ""
        args = build_parser().parse_args(
            ["refine", "--config", "c.json", "--replay", "other.jsonl"]
        )
        assert args.replay == "other.jsonl"

    def test_every_stage_has_a_subcommand(self):
        parser = build_parser()
        for name in ("select", "images", "generate", "mcq", "refine",
                     "filter", "sample", "stats", "pipeline"):
            args = parser.parse_args([name, "--config", "c.json"])
            assert args.command == name


class TestStageCommands:
    def test_full_pipeline_command(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        assert run_cli("pipeline", "--config", str(config)) == 0
        out = capsys.readouterr().out
        for stage in ("select", "images", "generate", "mcq", "refine",
                      "filter", "sample", "stats"):
            assert f"stage={stage}" in out
        assert "run manifest:" in out
        manifest = json.loads((tmp_path / "work" / "run_manifest.json").read_text())
        assert manifest["files"]["sampled.jsonl"]["records"] == 12

    def test_single_stage_prints_report_and_notes(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        assert run_cli("select", "--config", str(config)) == 0
        out = capsys.readouterr().out
        assert "stage=select" in out and "selected=5" in out
        assert "note: property cap for Germany: 2" in out
        assert (tmp_path / "work" / "run_manifest.json").exists()

    def test_stats_and_sample_print_their_artifacts(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        run_cli("pipeline", "--config", str(config))
        capsys.readouterr()
        assert run_cli("stats", "--config", str(config)) == 0
        assert "Template QA" in capsys.readouterr().out
        assert run_cli("sample", "--config", str(config), "--budget", "6") == 0
        out = capsys.readouterr().out
        assert "records=6" in out and "TOTAL" in out

    def test_workdir_and_seed_overrides(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        run_cli("pipeline", "--config", str(config))
        capsys.readouterr()
        alt = tmp_path / "alt"
        assert run_cli("select", "--config", str(config), "--workdir", str(alt)) == 0
        assert (alt / "selected.jsonl").exists()

    def test_replay_store_override_points_elsewhere(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        run_cli("pipeline", "--config", str(config))
        capsys.readouterr()
        empty_store = tmp_path / "empty_store.jsonl"
        empty_store.write_text("", encoding="utf-8")
        assert run_cli(
            "mcq", "--config", str(config), "--replay", str(empty_store)
        ) == 0
        out = capsys.readouterr().out
        assert "records=0" in out and "rejects=13" in out

    def test_replay_flag_without_store_uses_configured_one(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        run_cli("pipeline", "--config", str(config))
        capsys.readouterr()
        assert run_cli("mcq", "--config", str(config), "--replay") == 0
        assert "records=13" in capsys.readouterr().out


class TestErrors:
    def test_bad_config_returns_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{]", encoding="utf-8")
        assert run_cli("select", "--config", str(bad)) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_stage_input_returns_one(self, tmp_path, capsys):
        config = write_workspace(tmp_path)
        assert run_cli("refine", "--config", str(config)) == 1
        err = capsys.readouterr().err
        assert "error:" in err and "generate" in err


GOLD_LINES = [
    {"id": "a", "language": "en", "target": "Taj Mahal"},
    {"id": "b", "language": "en", "target": "Hampi", "aliases": ["Vijayanagara"]},
]


class TestEval:
    def write_inputs(self, tmp_path):
        gold = tmp_path / "gold.jsonl"
        gold.write_text(
            "\n".join(json.dumps(o) for o in GOLD_LINES) + "\n", encoding="utf-8"
        )
        good = tmp_path / "system_good.jsonl"
        good.write_text(
            json.dumps({"id": "a", "text": "Taj Mahal"}) + "\n"
            + json.dumps({"id": "b", "text": "Vijayanagara"}) + "\n",
            encoding="utf-8",
        )
        poor = tmp_path / "system_poor.jsonl"
        poor.write_text(json.dumps({"id": "a", "text": "no idea"}) + "\n", encoding="utf-8")
        return gold, good, poor

    def test_scores_multiple_systems(self, tmp_path, capsys):
        gold, good, poor = self.write_inputs(tmp_path)
        assert run_cli(
            "eval", "--gold", str(gold), "--pred", str(good), "--pred", str(poor)
        ) == 0
        out = capsys.readouterr().out
        assert "[exact]" in out and "[all_methods]" in out
        assert "system_good" in out and "system_poor" in out
        good_row = next(
            line for line in out.splitlines()
            if line.startswith("system_good") and "[" not in line
        )
        assert "50.0%" in good_row  # exact level: alias answer misses
        assert "0.0%" in out  # the poor system

    def test_out_file_written(self, tmp_path, capsys):
        gold, good, _ = self.write_inputs(tmp_path)
        table_path = tmp_path / "table.txt"
        assert run_cli(
            "eval", "--gold", str(gold), "--pred", str(good), "--out", str(table_path)
        ) == 0
        capsys.readouterr()
        assert "[exact]" in table_path.read_text(encoding="utf-8")

    def test_alias_credit_appears_at_alias_level(self, tmp_path, capsys):
        gold, good, _ = self.write_inputs(tmp_path)
        run_cli("eval", "--gold", str(gold), "--pred", str(good))
        out = capsys.readouterr().out
        blocks = out.split("[")
        alias_block = next(b for b in blocks if b.startswith("exact_alias]"))
        assert "100.0%" in alias_block
