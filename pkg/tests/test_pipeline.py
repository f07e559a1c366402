"""End-to-end stage runs over the handcrafted corpus.

Expected numbers, derived by hand from the fixtures in conftest:

* 5 entities selected: Q937, Q4606, Q82425 (Germany) and Q9141, Q5460 (India).
* Property caps: Germany 2 (eligible lengths 1,2,2), India 1 (lengths 1,1).
* Images: Einstein 1, Taj Mahal 3 (claim image first, dedup, cap), Hampi 2,
  Dietrich 0, Brandenburg Gate 1; total 7.
* Templated records: Einstein 4, Taj 12, Hampi 8, Dietrich 4, Gate 4 = 32.
* Choice groups (entity x language with records): 13.
* Filter input 45 = 32 refined + 13 choice; the offline echo model passes all.
* Sample: budget 12 at T_region=4, T_lang=1.5 gives Germany 6 / India 6,
  languages Germany en 3, fr 2, hi 1 and India en 2, fr 2, hi 2.
"""

from __future__ import annotations

import json
import random
import shutil
from pathlib import Path

import pytest

from conftest import write_workspace
from kultur.config import load_config
from kultur.gateway import ReplayStore, request_hash
from kultur.pipeline import (
    FILES,
    MissingInputError,
    PipelineError,
    _entity_ctx,
    check_retention,
    load_selected,
    run_pipeline,
    run_stage,
    write_run_manifest,
)
from kultur.prompts import render_prompt
from kultur.records import read_records

EXPECTED_IMAGES = {
    "Q937": ["File:Albert Einstein Head.jpg"],
    "Q9141": ["File:Taj Mahal exterior.jpg", "File:Taj door.jpg", "File:Taj aerial.jpg"],
    "Q5460": ["File:Virupaksha temple.jpg", "File:Hampi chariot.jpg"],
    "Q4606": [],
    "Q82425": ["File:Brandenburger Tor abends.jpg"],
}

EXPECTED_REGION = {
    "Q937": "Germany", "Q4606": "Germany", "Q82425": "Germany",
    "Q9141": "India", "Q5460": "India",
}


@pytest.fixture(scope="module")
def record_run(tmp_path_factory):
    """One full record-mode run shared by the read-only assertions."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = load_config(write_workspace(root))
    reports = run_pipeline(cfg)
    manifest = json.loads((cfg.workdir / FILES["run_manifest"]).read_text(encoding="utf-8"))
    return root, cfg, {r.stage: r for r in reports}, manifest


def records_of(path: Path):
    out = []
    for item in read_records(path):
        assert not hasattr(item, "reason"), f"diagnostic in {path}: {item}"
        out.append(item)
    return out


class TestRecordRun:
    def test_stage_reports(self, record_run):
        _, _, reports, _ = record_run
        assert reports["select"].counts == {
            "scanned": 9, "diagnostics": 0, "selected": 5, "referenced_labels": 4,
        }
        assert reports["images"].counts == {
            "entities": 5, "with_images": 4, "images": 7, "fetch_failures": 0,
        }
        assert reports["generate"].counts == {
            "entities": 5, "records": 32, "skipped_unnamed": 0, "skipped_unrenderable": 0,
        }
        assert reports["mcq"].counts["groups"] == 13
        assert reports["mcq"].counts["records"] == 13
        assert reports["mcq"].counts["rejects"] == 0
        assert reports["refine"].counts == {
            "input": 32, "records": 32, "rejects": 0, "leakage_rejects": 0, "orphans": 0,
        }
        assert reports["filter"].counts == {
            "input": 45, "records": 45, "rejects": 0, "orphans": 0,
        }
        assert reports["sample"].counts == {"input": 45, "after_dedup": 45, "records": 12}

    def test_selection_outputs(self, record_run):
        _, cfg, reports, _ = record_run
        selected = load_selected(cfg)
        assert {s.id: s.assigned_region for s in selected} == EXPECTED_REGION
        by_id = {s.id: s for s in selected}
        assert by_id["Q937"].eligible_properties == ["P27", "P19"]
        assert by_id["Q4606"].eligible_properties == ["P27", "P19"]
        assert by_id["Q9141"].eligible_properties == ["P17"]
        assert sorted(reports["select"].notes) == [
            "property cap for Germany: 2",
            "property cap for India: 1",
        ]
        labels = {}
        for line in (cfg.workdir / FILES["labels"]).read_text(encoding="utf-8").splitlines():
            obj = json.loads(line)
            labels[obj["id"]] = obj["labels"]
        assert sorted(labels) == ["Q183", "Q3012", "Q64", "Q668"]
        assert labels["Q3012"]["fr"] == "Ulm, Allemagne"

    def test_image_manifest(self, record_run):
        _, cfg, _, _ = record_run
        manifests = {}
        for line in (cfg.workdir / FILES["image_manifest"]).read_text(encoding="utf-8").splitlines():
            obj = json.loads(line)
            manifests[obj["entity_id"]] = [i["title"] for i in obj["images"]]
        assert manifests == EXPECTED_IMAGES

    def test_templated_records(self, record_run):
        _, cfg, _, _ = record_run
        records = records_of(cfg.workdir / FILES["templated"])
        assert len(records) == 32
        assert len({r.id for r in records}) == 32
        per_entity = {}
        for r in records:
            assert r.stage == "templated"
            per_entity[r.entity_id] = per_entity.get(r.entity_id, 0) + 1
        assert per_entity == {"Q937": 4, "Q9141": 12, "Q5460": 8, "Q4606": 4, "Q82425": 4}
        einstein_en = [r for r in records if r.entity_id == "Q937" and r.language == "en"]
        assert {r.kind for r in einstein_en} == {"property", "identity"}
        prop = next(r for r in einstein_en if r.kind == "property")
        assert prop.question == "Where was this person born?"
        assert prop.answer == "Albert Einstein was born in Ulm, Germany."
        assert prop.image == "File:Albert Einstein Head.jpg"
        for r in records:
            if r.entity_id == "Q4606":
                assert r.image is None

    def test_choice_records_follow_seeded_split(self, record_run):
        _, cfg, _, _ = record_run
        templated = records_of(cfg.workdir / FILES["templated"])
        groups: dict[tuple[str, str], object] = {}
        for r in templated:
            groups.setdefault((r.entity_id, r.language), r)
        rng = random.Random(f"{cfg.sampling.seed}|mcq-split")
        expected_kinds = [
            "mcq" if rng.random() < cfg.mcq_ratio else "truefalse"
            for _ in sorted(groups)
        ]
        choices = records_of(cfg.workdir / FILES["mcq"])
        assert [r.kind for r in choices] == expected_kinds
        seeds = dict(sorted(groups.items()))
        for key, r in zip(sorted(groups), choices):
            assert (r.entity_id, r.language) == key
            assert r.stage == "refined"
            seed = seeds[key]
            assert r.image == seed.image
            if r.kind == "mcq":
                assert r.question == seed.question  # echoed by the offline model
                assert r.options is not None and r.correct_index == 0
                assert r.answer == seed.answer == r.options[0]
            else:
                assert r.question == seed.answer  # statement restates the answer
                assert r.answer == "True"

    def test_refined_keep_lineage(self, record_run):
        _, cfg, _, _ = record_run
        templated = {r.id: r for r in records_of(cfg.workdir / FILES["templated"])}
        refined = records_of(cfg.workdir / FILES["refined"])
        assert len(refined) == 32
        for r in refined:
            assert r.stage == "refined"
            assert r.id in templated
            assert r.question == templated[r.id].question  # echo model
        assert (cfg.workdir / FILES["refine_rejects"]).read_text(encoding="utf-8") == ""

    def test_filtered_records(self, record_run):
        _, cfg, _, _ = record_run
        filtered = records_of(cfg.workdir / FILES["filtered"])
        assert len(filtered) == 45
        kinds = {"open": 0, "choice": 0}
        for r in filtered:
            assert r.stage == "filtered"
            assert r.verdict is not None and r.verdict.match
            kinds["choice" if r.kind in ("mcq", "truefalse") else "open"] += 1
        assert kinds == {"open": 32, "choice": 13}
        choice = next(r for r in filtered if r.kind in ("mcq", "truefalse"))
        assert choice.verdict.culturally_relevant is True

    def test_sampled_matches_hand_computed_quotas(self, record_run):
        _, cfg, _, _ = record_run
        sampled = records_of(cfg.workdir / FILES["sampled"])
        assert len(sampled) == 12
        buckets: dict[tuple[str, str], int] = {}
        for r in sampled:
            buckets[(r.region, r.language)] = buckets.get((r.region, r.language), 0) + 1
        assert buckets == {
            ("Germany", "en"): 3, ("Germany", "fr"): 2, ("Germany", "hi"): 1,
            ("India", "en"): 2, ("India", "fr"): 2, ("India", "hi"): 2,
        }
        filtered_ids = {r.id for r in records_of(cfg.workdir / FILES["filtered"])}
        assert all(r.id in filtered_ids for r in sampled)
        plan = (cfg.workdir / FILES["plan"]).read_text(encoding="utf-8")
        assert "REGION" in plan and "TOTAL" in plan

    def test_stats_outputs(self, record_run):
        _, cfg, _, _ = record_run
        stats = json.loads((cfg.workdir / FILES["stats_json"]).read_text(encoding="utf-8"))
        assert stats["per_region"]["Germany"] == {
            "entities": 3, "images": 2, "templated": 12, "open_ended": 12,
            "mcq": 7, "open_ended_filtered": 12, "mcq_filtered": 7,
        }
        assert stats["per_region"]["India"] == {
            "entities": 2, "images": 5, "templated": 20, "open_ended": 20,
            "mcq": 6, "open_ended_filtered": 20, "mcq_filtered": 6,
        }
        assert stats["per_language"]["en"] == {
            "open_ended": 16, "mcq": 5, "open_ended_filtered": 16, "mcq_filtered": 5,
        }
        assert stats["per_language"]["hi"] == {
            "open_ended": 6, "mcq": 3, "open_ended_filtered": 6, "mcq_filtered": 3,
        }
        assert stats["connectivity"] == {"1": 3, "2": 2}
        assert stats["wikipedia_presence"] == pytest.approx(0.8)
        assert stats["entity_count"] == 5
        table = (cfg.workdir / FILES["stats_table"]).read_text(encoding="utf-8")
        assert "TOTAL" in table and "Template QA" in table

    def test_run_manifest_reconciles(self, record_run):
        _, cfg, _, manifest = record_run
        assert set(manifest["stages"]) == {
            "select", "images", "generate", "mcq", "refine", "filter", "sample", "stats",
        }
        files = manifest["files"]
        assert files["selected.jsonl"]["records"] == 5
        assert files["templated.jsonl"]["records"] == 32
        assert files["mcq.jsonl"]["records"] == 13
        assert files["refined.jsonl"]["records"] == 32
        assert files["filtered.jsonl"]["records"] == 45
        assert files["sampled.jsonl"]["records"] == 12
        for entry in files.values():
            assert len(entry["sha256"]) == 64

    def test_response_store_entry_count(self, record_run):
        root, _, _, _ = record_run
        # refine prompts carry no image, so the three Taj Mahal image variants
        # of one question share a response: 20 refine + 13 choice + 45 filter.
        lines = [
            line for line in (root / "gateway_store.jsonl")
            .read_text(encoding="utf-8").splitlines() if line.strip()
        ]
        assert len(lines) == 78

    def test_retention_check_passes(self, record_run):
        _, cfg, _, _ = record_run
        check_retention(cfg)


class TestReplayRun:
    def test_replay_reproduces_record_run_byte_for_byte(self, record_run):
        root, _, _, record_manifest = record_run
        cfg = load_config(write_workspace(root, mode="replay", workdir="work2"))
        run_pipeline(cfg)
        replay_manifest = json.loads(
            (cfg.workdir / FILES["run_manifest"]).read_text(encoding="utf-8")
        )
        assert replay_manifest["files"] == record_manifest["files"]
        assert replay_manifest["stages"] == record_manifest["stages"]

    def test_replay_never_writes_the_store(self, record_run):
        root, _, _, _ = record_run
        store = root / "gateway_store.jsonl"
        before = store.read_bytes()
        cfg = load_config(write_workspace(root, mode="replay", workdir="work3"))
        run_pipeline(cfg)
        assert store.read_bytes() == before


class TestInjectedResponses:
    """Overriding single store entries exercises the reject paths."""

    def prepare(self, record_run, workdir: str, store_name: str):
        root, _, _, _ = record_run
        cfg = load_config(write_workspace(root, mode="replay", workdir=workdir))
        store_copy = root / store_name
        if not store_copy.exists():
            shutil.copyfile(root / "gateway_store.jsonl", store_copy)
        cfg.gateway_store = store_copy
        return cfg, store_copy

    def test_leaking_rewrite_is_rejected(self, record_run):
        cfg, store_copy = self.prepare(record_run, "work_leak", "store_leak.jsonl")
        for stage in ("select", "images", "generate"):
            run_stage(stage, cfg)
        selected = {s.id: s for s in load_selected(cfg)}
        target = next(
            r for r in records_of(cfg.workdir / FILES["templated"])
            if r.entity_id == "Q937" and r.language == "en" and r.kind == "property"
        )
        ctx = _entity_ctx(selected["Q937"], "en", cfg)
        ctx["question"] = target.question
        ctx["answer"] = target.answer
        req = render_prompt("refine", ctx)
        ReplayStore(store_copy).put(
            request_hash(req),
            "Q: Where in Germany was Albert Einstein born?\nA: In Ulm.",
        )
        report = run_stage("refine", cfg)
        assert report.counts["records"] == 31
        assert report.counts["leakage_rejects"] == 1
        rejects = [
            json.loads(line)
            for line in (cfg.workdir / FILES["refine_rejects"])
            .read_text(encoding="utf-8").splitlines()
        ]
        assert len(rejects) == 1
        assert rejects[0]["id"] == target.id
        assert rejects[0]["reason"] == "leakage"
        assert "Albert Einstein" in rejects[0]["detail"]

    def test_failing_verdict_is_rejected(self, record_run):
        cfg, store_copy = self.prepare(record_run, "work_rej", "store_rej.jsonl")
        for stage in ("select", "images", "generate", "mcq", "refine"):
            run_stage(stage, cfg)
        selected = {s.id: s for s in load_selected(cfg)}
        target = next(
            r for r in records_of(cfg.workdir / FILES["refined"])
            if r.entity_id == "Q937" and r.language == "en" and r.kind == "property"
        )
        ctx = _entity_ctx(selected["Q937"], "en", cfg)
        ctx["question"] = target.question
        ctx["answer"] = target.answer
        req = render_prompt("vqa-filter", ctx, image=target.image)
        ReplayStore(store_copy).put(
            request_hash(req),
            "MATCH: False\nISSUE: FactualError\nEXPLANATION: The answer names the wrong city.",
        )
        report = run_stage("filter", cfg)
        assert report.counts["records"] == 44
        assert report.counts["rejects"] == 1
        rejects = [
            json.loads(line)
            for line in (cfg.workdir / FILES["filter_rejects"])
            .read_text(encoding="utf-8").splitlines()
        ]
        assert rejects[0]["id"] == target.id
        assert rejects[0]["reason"] == "verdict:FactualError"
        run_stage("sample", cfg)
        check_retention(cfg)

    def test_malformed_replay_response_is_rejected_not_retried(self, record_run):
        cfg, store_copy = self.prepare(record_run, "work_bad", "store_bad.jsonl")
        for stage in ("select", "images", "generate"):
            run_stage(stage, cfg)
        selected = {s.id: s for s in load_selected(cfg)}
        target = next(
            r for r in records_of(cfg.workdir / FILES["templated"])
            if r.entity_id == "Q5460" and r.language == "en" and r.kind == "identity"
        )
        ctx = _entity_ctx(selected["Q5460"], "en", cfg)
        ctx["question"] = target.question
        ctx["answer"] = target.answer
        ReplayStore(store_copy).put(
            request_hash(render_prompt("refine", ctx)),
            "I can not confirm anything about this one.",
        )
        report = run_stage("refine", cfg)
        # the broken reply covered both image variants of the Hampi question
        assert report.counts["records"] == 30
        assert report.counts["rejects"] == 2
        rejects = (cfg.workdir / FILES["refine_rejects"]).read_text(encoding="utf-8")
        assert "malformed:missing-q-marker" in rejects


class TestGuards:
    def test_missing_inputs_name_the_producer_stage(self, record_run, tmp_path):
        root, _, _, _ = record_run
        cfg = load_config(write_workspace(root))
        cfg.workdir = tmp_path / "empty"
        expectations = {
            "images": "select",
            "generate": "select",
            "mcq": "generate",
            "refine": "generate",
            "filter": "refine",
            "sample": "filter",
            "stats": "select",
        }
        for stage, producer in expectations.items():
            with pytest.raises(MissingInputError, match=producer):
                run_stage(stage, cfg)

    def test_missing_dump_and_templates(self, record_run, tmp_path):
        root, _, _, _ = record_run
        cfg = load_config(write_workspace(root))
        cfg.workdir = tmp_path / "w"
        cfg.dump = tmp_path / "absent.json"
        with pytest.raises(MissingInputError, match="does not exist"):
            run_stage("select", cfg)
        cfg2 = load_config(write_workspace(root))
        cfg2.templates = tmp_path / "absent.jsonl"
        with pytest.raises(MissingInputError, match="does not exist"):
            run_stage("generate", cfg2)

    def test_unknown_stage(self, record_run):
        _, cfg, _, _ = record_run
        with pytest.raises(PipelineError, match="unknown stage"):
            run_stage("polish", cfg)

    def test_corrupt_record_file_aborts_stage(self, record_run, tmp_path):
        root, cfg, _, _ = record_run
        doctored = tmp_path / "doctored"
        shutil.copytree(cfg.workdir, doctored)
        with open(doctored / FILES["templated"], "a", encoding="utf-8") as fh:
            fh.write("{ not a record\n")
        bad_cfg = load_config(write_workspace(root, mode="replay", workdir="unused1"))
        bad_cfg.workdir = doctored
        with pytest.raises(PipelineError, match="unreadable record"):
            run_stage("refine", bad_cfg)

    def test_retention_check_catches_inflation(self, record_run, tmp_path):
        root, cfg, _, _ = record_run
        doctored = tmp_path / "inflated"
        shutil.copytree(cfg.workdir, doctored)
        filtered = doctored / FILES["filtered"]
        lines = filtered.read_text(encoding="utf-8").splitlines()
        extra = json.loads(next(
            line for line in lines if '"kind": "identity"' in line or '"identity"' in line
        ))
        extra["id"] = "f" * 16
        with open(filtered, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(extra, ensure_ascii=False) + "\n")
        bad_cfg = load_config(write_workspace(root))
        bad_cfg.workdir = doctored
        with pytest.raises(PipelineError, match="retention violated"):
            check_retention(bad_cfg)

    def test_single_stage_rerun_merges_manifest(self, record_run, tmp_path):
        root, cfg, _, _ = record_run
        rerun_dir = tmp_path / "rerun"
        shutil.copytree(cfg.workdir, rerun_dir)
        cfg2 = load_config(write_workspace(root))
        cfg2.workdir = rerun_dir
        cfg2.sampling.budget = 5
        report = run_stage("sample", cfg2)
        assert report.counts["records"] == 5
        manifest = write_run_manifest(cfg2, [report])
        assert manifest["stages"]["sample"]["records"] == 5
        assert manifest["stages"]["select"]["selected"] == 5  # earlier entry kept
        assert manifest["files"]["sampled.jsonl"]["records"] == 5
