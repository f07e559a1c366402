"""Stage runners for the end-to-end curation pipeline.

Stages communicate only through files in the working directory, so any stage
can be rerun in isolation and a full run is resumable:

    select    dump -> selected.jsonl, labels.jsonl
    images    selected.jsonl -> image_manifest.jsonl
    generate  selected + labels + manifest + templates -> templated.jsonl
    mcq       templated.jsonl -> mcq.jsonl (choice records, refined stage)
    refine    templated.jsonl -> refined.jsonl (+ refine_rejects.jsonl)
    filter    refined.jsonl + mcq.jsonl -> filtered.jsonl (+ filter_rejects.jsonl)
    sample    filtered.jsonl -> sampled.jsonl, sampling_plan.txt
    stats     all record files -> stats.txt, stats.json

Record files carry stage-tagged dataset records; reject piles keep the full
record plus a classified reason so nothing is dropped silently.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from . import images as images_mod
from .config import PipelineConfig
from .gateway import (
    Gateway,
    GatewayError,
    HttpModelClient,
    ModelClient,
    ReplayStore,
    StubModelClient,
    dry_run_handler,
)
from .kg import ClaimValue, Entity, ParseDiagnostic, is_qid, parse_dump_stream
from .languages import language_name
from .parsing import (
    MalformedResponse,
    McqItem,
    leakage_check,
    parse_filter_verdict,
    parse_mcq_response,
    parse_refine_response,
    parse_tf_response,
)
from .prompts import PromptRequest, options_text, render_prompt
from .qa import (
    TemplateStore,
    instantiate_entity_qa,
    instantiate_property_qa,
    pick_label,
    render_value,
)
from .records import (
    DatasetRecord,
    derive_filtered,
    derive_refined,
    mcq_record,
    read_records,
    record_id,
    tf_record,
    write_records,
)
from .sampling import dedup_records, hybrid_sample, render_plan
from .select import (
    SelectedEntity,
    cap_entity_properties,
    country_property_median,
    select_cultural_entities,
)
from .stats import compute_stats, write_stats

logger = logging.getLogger(__name__)

STAGES = ("select", "images", "generate", "mcq", "refine", "filter", "sample", "stats")

FILES = {
    "selected": "selected.jsonl",
    "labels": "labels.jsonl",
    "image_manifest": "image_manifest.jsonl",
    "templated": "templated.jsonl",
    "mcq": "mcq.jsonl",
    "mcq_rejects": "mcq_rejects.jsonl",
    "refined": "refined.jsonl",
    "refine_rejects": "refine_rejects.jsonl",
    "filtered": "filtered.jsonl",
    "filter_rejects": "filter_rejects.jsonl",
    "sampled": "sampled.jsonl",
    "plan": "sampling_plan.txt",
    "stats_table": "stats.txt",
    "stats_json": "stats.json",
    "run_manifest": "run_manifest.json",
}


class PipelineError(Exception):
    """A stage could not complete."""


class MissingInputError(PipelineError):
    """A stage's input file does not exist yet."""


@dataclass
class StageReport:
    stage: str
    counts: dict[str, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def line(self) -> str:
        parts = [f"stage={self.stage}"]
        parts.extend(f"{k}={v}" for k, v in self.counts.items())
        return " ".join(parts)


def _workpath(cfg: PipelineConfig, key: str) -> Path:
    return cfg.workdir / FILES[key]


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"{path} is missing; run the {producer} stage first")
    return path


# ---------------------------------------------------------------------------
# selected.jsonl sidecar
# ---------------------------------------------------------------------------

def _cv_to_dict(v: ClaimValue) -> dict:
    obj: dict = {"kind": v.kind}
    if v.value:
        obj["value"] = v.value
    if v.unit is not None:
        obj["unit"] = v.unit
    if v.precision is not None:
        obj["precision"] = v.precision
    if v.lat is not None:
        obj["lat"] = v.lat
        obj["lon"] = v.lon
    return obj


def _cv_from_dict(obj: dict) -> ClaimValue:
    return ClaimValue(
        kind=obj["kind"],
        value=obj.get("value", ""),
        unit=obj.get("unit"),
        precision=obj.get("precision"),
        lat=obj.get("lat"),
        lon=obj.get("lon"),
    )


def _selected_to_dict(s: SelectedEntity, keep_claims: Iterable[str]) -> dict:
    e = s.entity
    keep = set(keep_claims)
    return {
        "id": e.id,
        "region": s.assigned_region,
        "matched": [list(pair) for pair in s.matched_pairs],
        "eligible_properties": s.eligible_properties,
        "labels": e.labels,
        "descriptions": e.descriptions,
        "aliases": e.aliases,
        "sitelinks": e.sitelinks,
        "claims": {
            pid: [_cv_to_dict(v) for v in values]
            for pid, values in e.claims.items()
            if pid in keep
        },
    }


def _selected_from_dict(obj: dict) -> SelectedEntity:
    entity = Entity(
        id=obj["id"],
        labels=obj.get("labels", {}),
        descriptions=obj.get("descriptions", {}),
        aliases=obj.get("aliases", {}),
        claims={
            pid: [_cv_from_dict(v) for v in values]
            for pid, values in obj.get("claims", {}).items()
        },
        sitelinks=obj.get("sitelinks", {}),
    )
    return SelectedEntity(
        entity=entity,
        assigned_region=obj["region"],
        matched_pairs=[tuple(p) for p in obj.get("matched", [])],
        eligible_properties=list(obj.get("eligible_properties", [])),
    )


def load_selected(cfg: PipelineConfig) -> list[SelectedEntity]:
    path = _require(_workpath(cfg, "selected"), "select")
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(_selected_from_dict(json.loads(line)))
    return out


def load_labels(cfg: PipelineConfig) -> dict[str, dict[str, str]]:
    path = _require(_workpath(cfg, "labels"), "select")
    table: dict[str, dict[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                table[obj["id"]] = obj.get("labels", {})
    return table


def load_manifests(cfg: PipelineConfig) -> dict[str, images_mod.ImageManifest]:
    path = _require(_workpath(cfg, "image_manifest"), "images")
    out: dict[str, images_mod.ImageManifest] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out[obj["entity_id"]] = images_mod.ImageManifest(
                entity_id=obj["entity_id"],
                images=[
                    images_mod.ImageRef(title=i["title"], source=i["source"])
                    for i in obj.get("images", [])
                ],
                fetch_failures=list(obj.get("fetch_failures", [])),
            )
    return out


def _load_record_file(path: Path, strict: bool = True) -> list[DatasetRecord]:
    out: list[DatasetRecord] = []
    for item in read_records(path):
        if isinstance(item, ParseDiagnostic):
            msg = f"{path}:{item.line}: {item.reason}"
            if strict:
                raise PipelineError(msg)
            logger.warning("%s", msg)
            continue
        out.append(item)
    return out


def _write_rejects(path: Path, rejects: list[tuple[DatasetRecord, str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record, reason, detail in rejects:
            obj = {"id": record.id, "reason": reason}
            if detail:
                obj["detail"] = detail
            obj["record"] = {
                "entity_id": record.entity_id,
                "region": record.region,
                "language": record.language,
                "kind": record.kind,
                "question": record.question,
                "answer": record.answer,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# select
# ---------------------------------------------------------------------------

def run_select(cfg: PipelineConfig) -> StageReport:
    """Two passes over the dump: pick entities, then collect the labels of
    everything their eligible claims reference."""
    if cfg.dump is None:
        raise MissingInputError("config has no dump path")
    dump = Path(cfg.dump)
    if not dump.exists():
        raise MissingInputError(f"dump file {dump} does not exist")
    cfg.workdir.mkdir(parents=True, exist_ok=True)

    report = StageReport(stage="select")
    diagnostics = 0
    scanned = 0
    selected: list[SelectedEntity] = []
    seen_ids: set[str] = set()

    def entity_stream() -> Iterator[Entity]:
        nonlocal diagnostics, scanned
        with open(dump, "rb") as fh:
            for item in parse_dump_stream(fh):
                if isinstance(item, ParseDiagnostic):
                    diagnostics += 1
                    logger.warning("dump line %d: %s", item.line, item.reason)
                    continue
                scanned += 1
                yield item

    for s in select_cultural_entities(entity_stream(), cfg.selection):
        if s.id in seen_ids:
            logger.warning("duplicate entity %s in dump; keeping first occurrence", s.id)
            continue
        seen_ids.add(s.id)
        selected.append(s)

    medians = country_property_median(selected)
    selected = cap_entity_properties(selected, medians)

    needed: set[str] = set()
    for s in selected:
        for pid in s.eligible_properties:
            for v in s.entity.claims.get(pid, ()):
                if v.kind == "entity-ref":
                    needed.add(v.value)
                elif v.kind == "quantity" and v.unit:
                    needed.add(v.unit)
    needed -= seen_ids  # labels of selected entities ride along in selected.jsonl

    labels: dict[str, dict[str, str]] = {}
    if needed:
        with open(dump, "rb") as fh:
            for item in parse_dump_stream(fh):
                if isinstance(item, Entity) and item.id in needed:
                    labels[item.id] = item.labels

    keep_claims = set(cfg.selection.properties) | {images_mod.P_IMAGE, images_mod.P_COMMONS_CATEGORY}
    with open(_workpath(cfg, "selected"), "w", encoding="utf-8") as fh:
        for s in selected:
            fh.write(json.dumps(_selected_to_dict(s, keep_claims), ensure_ascii=False) + "\n")
    with open(_workpath(cfg, "labels"), "w", encoding="utf-8") as fh:
        for qid in sorted(labels):
            fh.write(json.dumps({"id": qid, "labels": labels[qid]}, ensure_ascii=False) + "\n")

    report.counts = {
        "scanned": scanned,
        "diagnostics": diagnostics,
        "selected": len(selected),
        "referenced_labels": len(labels),
    }
    for region in sorted(medians):
        report.notes.append(f"property cap for {region}: {medians[region]}")
    unresolved = len(needed) - len(labels)
    if unresolved:
        report.notes.append(f"{unresolved} referenced items have no dump entry")
    return report


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------

def _commons_client(cfg: PipelineConfig):
    mode = cfg.gateway_policy.mode
    store = cfg.images.listing_store
    if mode == "replay":
        if store is None or not Path(store).exists():
            return None, "no listing store; claim images only"
        return images_mod.ReplayCommonsClient(store), None
    http = images_mod.HttpCommonsClient(endpoint=cfg.images.endpoint)
    if mode == "record":
        if store is None:
            raise PipelineError("record mode requires images.listing_store")
        Path(store).parent.mkdir(parents=True, exist_ok=True)
        return images_mod.RecordingCommonsClient(http, store), None
    return http, None


def run_images(cfg: PipelineConfig) -> StageReport:
    selected = load_selected(cfg)
    client, note = _commons_client(cfg)
    manifests = images_mod.build_image_manifest(
        (s.entity for s in selected),
        client,
        max_per_entity=cfg.images.max_per_entity,
        max_in_flight=cfg.images.max_in_flight,
    )
    with open(_workpath(cfg, "image_manifest"), "w", encoding="utf-8") as fh:
        for m in manifests:
            obj = {
                "entity_id": m.entity_id,
                "images": [{"title": i.title, "source": i.source} for i in m.images],
            }
            if m.fetch_failures:
                obj["fetch_failures"] = m.fetch_failures
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")

    report = StageReport(stage="images")
    report.counts = {
        "entities": len(manifests),
        "with_images": sum(1 for m in manifests if m.images),
        "images": sum(len(m.images) for m in manifests),
        "fetch_failures": sum(len(m.fetch_failures) for m in manifests),
    }
    if note:
        report.notes.append(note)
    return report


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def run_generate(cfg: PipelineConfig) -> StageReport:
    if cfg.templates is None:
        raise MissingInputError("config has no templates path")
    templates = Path(cfg.templates)
    if not templates.exists():
        raise MissingInputError(f"template file {templates} does not exist")
    store = TemplateStore.load(templates)
    selected = load_selected(cfg)
    labels = load_labels(cfg)
    manifests = load_manifests(cfg)
    for s in selected:
        labels.setdefault(s.id, s.entity.labels)

    records: list[DatasetRecord] = []
    skipped_unnamed = 0
    skipped_unrenderable = 0
    for s in selected:
        e = s.entity
        manifest = manifests.get(s.id)
        image_titles: list[str | None] = (
            [ref.title for ref in manifest.images] if manifest and manifest.images else [None]
        )
        for lang in cfg.selection.languages:
            name = pick_label(e.labels, lang)
            if name is None:
                skipped_unnamed += 1
                continue
            qas = []
            for pid in s.eligible_properties:
                for template in store.property_templates(pid, lang):
                    value_text = None
                    for v in e.claims.get(pid, ()):
                        value_text = render_value(v, labels, lang)
                        if value_text is not None:
                            break
                    if value_text is None:
                        skipped_unrenderable += 1
                        continue
                    qas.append(instantiate_property_qa(template, name, value_text))
            description = e.descriptions.get(lang) or e.descriptions.get("en")
            for template in store.identity_templates(lang):
                qas.append(instantiate_entity_qa(template, name, description))
            for title in image_titles:
                for qa in qas:
                    records.append(DatasetRecord(
                        id=record_id(s.id, qa.scope, qa.property, lang, title, qa.question),
                        entity_id=s.id,
                        region=s.assigned_region,
                        language=lang,
                        kind=qa.scope,
                        question=qa.question,
                        answer=qa.answer,
                        stage="templated",
                        property=qa.property,
                        image=title,
                    ))
    count = write_records(records, _workpath(cfg, "templated"))
    report = StageReport(stage="generate")
    report.counts = {
        "entities": len(selected),
        "records": count,
        "skipped_unnamed": skipped_unnamed,
        "skipped_unrenderable": skipped_unrenderable,
    }
    return report


# ---------------------------------------------------------------------------
# gateway plumbing shared by mcq / refine / filter
# ---------------------------------------------------------------------------

def _build_gateways(cfg: PipelineConfig) -> Callable[[PromptRequest], Gateway]:
    """Router from a request's meta (region, language) to a gateway.

    Replay mode needs no client at all. In live and record modes each
    configured client gets its own gateway; they share the response store.
    """
    policy = cfg.gateway_policy
    store = None
    if policy.mode in ("record", "replay"):
        if cfg.gateway_store is None:
            raise PipelineError(f"{policy.mode} mode requires gateway.store in config")
        Path(cfg.gateway_store).parent.mkdir(parents=True, exist_ok=True)
        store = ReplayStore(cfg.gateway_store)

    if policy.mode == "replay":
        gateway = Gateway(client=None, policy=policy, store=store)
        return lambda req: gateway

    gateways: dict[str, Gateway] = {}

    def route(req: PromptRequest) -> Gateway:
        spec = cfg.resolve_client(req.meta.get("region", "*"), req.meta.get("language", "*"))
        if spec.name not in gateways:
            client: ModelClient
            if spec.endpoint.startswith("stub:"):
                client = StubModelClient(dry_run_handler)
            else:
                client = HttpModelClient(
                    endpoint=spec.endpoint,
                    model=spec.model,
                    api_key_env=spec.api_key_env,
                )
            gateways[spec.name] = Gateway(client=client, policy=policy, store=store)
        return gateways[spec.name]

    return route


def _dispatch_parsed(
    route: Callable[[PromptRequest], Gateway],
    jobs: list[tuple[DatasetRecord, PromptRequest]],
    parser: Callable[[PromptRequest, str], object],
    mode: str,
) -> tuple[list[tuple[DatasetRecord, object]], list[tuple[DatasetRecord, str, str]]]:
    """Dispatch a batch, parse replies, retry malformed ones once.

    Returns (accepted, rejected); a reject carries the source record, a
    classified reason and a short detail. Replay mode gets no second chance
    because the stored bytes are all there is.
    """
    accepted: list[tuple[DatasetRecord, object]] = []
    rejected: list[tuple[DatasetRecord, str, str]] = []
    by_gateway: dict[int, tuple[Gateway, list[int]]] = {}
    for i, (_, req) in enumerate(jobs):
        gw = route(req)
        by_gateway.setdefault(id(gw), (gw, []))[1].append(i)

    texts: list[str | GatewayError | None] = [None] * len(jobs)
    for gw, indices in by_gateway.values():
        batch = [jobs[i][1] for i in indices]
        for i, result in zip(indices, gw.dispatch_many(batch)):
            texts[i] = result

    for (record, req), text in zip(jobs, texts):
        if isinstance(text, GatewayError):
            rejected.append((record, "gateway-error", str(text)))
            continue
        assert text is not None
        try:
            accepted.append((record, parser(req, text)))
            continue
        except MalformedResponse as exc:
            if mode == "replay":
                rejected.append((record, f"malformed:{exc.reason}", exc.detail))
                continue
        gw = route(req)
        try:
            retry_text = gw.dispatch(req, force_refresh=True)
            accepted.append((record, parser(req, retry_text)))
        except MalformedResponse as exc:
            rejected.append((record, f"malformed:{exc.reason}", exc.detail))
        except GatewayError as exc:
            rejected.append((record, "gateway-error", str(exc)))
    return accepted, rejected


def _entity_ctx(s: SelectedEntity, lang: str, cfg: PipelineConfig) -> dict[str, str]:
    e = s.entity
    return {
        "language_name": language_name(lang, cfg.language_names),
        "language": language_name(lang, cfg.language_names),
        "label": pick_label(e.labels, lang) or "",
        "description": e.descriptions.get(lang) or e.descriptions.get("en") or "",
        "region": s.assigned_region,
    }


# ---------------------------------------------------------------------------
# mcq
# ---------------------------------------------------------------------------

def run_mcq(cfg: PipelineConfig) -> StageReport:
    """Generate choice-format records, seeded one per (entity, language).

    The first templated record of each group provides the context QA and the
    image. A seeded split decides between multiple-choice and true/false
    formats at the configured ratio.
    """
    templated = _load_record_file(_require(_workpath(cfg, "templated"), "generate"))
    selected = {s.id: s for s in load_selected(cfg)}

    groups: dict[tuple[str, str], DatasetRecord] = {}
    for r in templated:
        groups.setdefault((r.entity_id, r.language), r)

    rng = random.Random(f"{cfg.sampling.seed}|mcq-split")
    jobs: list[tuple[DatasetRecord, PromptRequest]] = []
    for (entity_id, lang), seed_record in sorted(groups.items()):
        s = selected.get(entity_id)
        if s is None:
            continue
        kind = "mcq" if rng.random() < cfg.mcq_ratio else "truefalse"
        ctx = _entity_ctx(s, lang, cfg)
        ctx["question"] = seed_record.question
        ctx["answer"] = seed_record.answer
        req = render_prompt(
            kind,
            ctx,
            meta={"region": seed_record.region, "language": lang, "source": seed_record.id},
        )
        jobs.append((seed_record, req))

    route = _build_gateways(cfg)

    def parse(req: PromptRequest, text: str):
        if req.kind == "mcq":
            return parse_mcq_response(text)
        return parse_tf_response(text)

    accepted, rejected = _dispatch_parsed(route, jobs, parse, cfg.gateway_policy.mode)

    out: list[DatasetRecord] = []
    for source, item in accepted:
        if isinstance(item, McqItem):
            out.append(mcq_record(source, item))
        else:
            out.append(tf_record(source, item))
    count = write_records(out, _workpath(cfg, "mcq"))
    _write_rejects(_workpath(cfg, "mcq_rejects"), rejected)

    report = StageReport(stage="mcq")
    report.counts = {
        "groups": len(groups),
        "records": count,
        "mcq": sum(1 for r in out if r.kind == "mcq"),
        "truefalse": sum(1 for r in out if r.kind == "truefalse"),
        "rejects": len(rejected),
    }
    return report


# ---------------------------------------------------------------------------
# refine
# ---------------------------------------------------------------------------

def run_refine(cfg: PipelineConfig) -> StageReport:
    templated = _load_record_file(_require(_workpath(cfg, "templated"), "generate"))
    selected = {s.id: s for s in load_selected(cfg)}

    jobs: list[tuple[DatasetRecord, PromptRequest]] = []
    orphans = 0
    for r in templated:
        s = selected.get(r.entity_id)
        if s is None:
            orphans += 1
            continue
        ctx = _entity_ctx(s, r.language, cfg)
        ctx["question"] = r.question
        ctx["answer"] = r.answer
        req = render_prompt(
            "refine",
            ctx,
            meta={"region": r.region, "language": r.language, "source": r.id},
        )
        jobs.append((r, req))

    route = _build_gateways(cfg)
    accepted, rejected = _dispatch_parsed(
        route, jobs, lambda req, text: parse_refine_response(text), cfg.gateway_policy.mode
    )

    out: list[DatasetRecord] = []
    leaks = 0
    for source, refined in accepted:
        s = selected[source.entity_id]
        if leakage_check(refined.question, s.entity, source.language):
            leaks += 1
            rejected.append((source, "leakage", refined.question))
            continue
        out.append(derive_refined(source, refined))
    count = write_records(out, _workpath(cfg, "refined"))
    _write_rejects(_workpath(cfg, "refine_rejects"), rejected)

    report = StageReport(stage="refine")
    report.counts = {
        "input": len(templated),
        "records": count,
        "rejects": len(rejected),
        "leakage_rejects": leaks,
        "orphans": orphans,
    }
    return report


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

def run_filter(cfg: PipelineConfig) -> StageReport:
    refined = _load_record_file(_require(_workpath(cfg, "refined"), "refine"))
    choice_path = _workpath(cfg, "mcq")
    choices = _load_record_file(choice_path) if choice_path.exists() else []
    selected = {s.id: s for s in load_selected(cfg)}

    jobs: list[tuple[DatasetRecord, PromptRequest]] = []
    orphans = 0
    for r in refined + choices:
        s = selected.get(r.entity_id)
        if s is None:
            orphans += 1
            continue
        ctx = _entity_ctx(s, r.language, cfg)
        ctx["question"] = r.question
        ctx["answer"] = r.answer
        if r.kind in ("mcq", "truefalse"):
            kind = "mcq-filter"
            if r.kind == "mcq":
                assert r.options is not None and r.correct_index is not None
                ctx["question_type"] = "multiple-choice"
                ctx["options_text"] = options_text(list(r.options))
                ctx["correct_answer"] = r.options[r.correct_index]
            else:
                ctx["question_type"] = "true/false"
                ctx["options_text"] = "True | False"
                ctx["correct_answer"] = r.answer
            ctx["explanation"] = r.explanation or ""
        else:
            kind = "vqa-filter"
        req = render_prompt(
            kind,
            ctx,
            image=r.image,
            meta={"region": r.region, "language": r.language, "source": r.id},
        )
        jobs.append((r, req))

    route = _build_gateways(cfg)
    accepted, rejected = _dispatch_parsed(
        route, jobs,
        lambda req, text: parse_filter_verdict(text, req.kind),
        cfg.gateway_policy.mode,
    )

    kept: list[DatasetRecord] = []
    for source, verdict in accepted:
        if verdict.match:
            kept.append(derive_filtered(source, verdict))
        else:
            rejected.append((source, f"verdict:{verdict.issue}", verdict.explanation))
    count = write_records(kept, _workpath(cfg, "filtered"))
    _write_rejects(_workpath(cfg, "filter_rejects"), rejected)

    report = StageReport(stage="filter")
    report.counts = {
        "input": len(refined) + len(choices),
        "records": count,
        "rejects": len(rejected),
        "orphans": orphans,
    }
    return report


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def run_sample(cfg: PipelineConfig) -> StageReport:
    filtered = _load_record_file(_require(_workpath(cfg, "filtered"), "filter"))
    unique = list(dedup_records(filtered))
    plan, chosen = hybrid_sample(
        unique,
        t_region=cfg.sampling.t_region,
        t_lang=cfg.sampling.t_lang,
        budget=cfg.sampling.budget,
        seed=cfg.sampling.seed,
    )
    count = write_records(chosen, _workpath(cfg, "sampled"))
    with open(_workpath(cfg, "plan"), "w", encoding="utf-8") as fh:
        fh.write(render_plan(plan))

    report = StageReport(stage="sample")
    report.counts = {
        "input": len(filtered),
        "after_dedup": len(unique),
        "records": count,
    }
    return report


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def _stage_records(cfg: PipelineConfig) -> Iterator[DatasetRecord]:
    for key in ("templated", "mcq", "refined", "filtered"):
        path = _workpath(cfg, key)
        if path.exists():
            yield from _load_record_file(path)


def run_stats(cfg: PipelineConfig) -> StageReport:
    selected = load_selected(cfg)
    regions = {s.id: s.assigned_region for s in selected}

    image_counts: dict[str, int] = {}
    manifest_path = _workpath(cfg, "image_manifest")
    if manifest_path.exists():
        image_counts = {
            mid: len(m.images) for mid, m in load_manifests(cfg).items()
        }

    entities: Iterable[Entity]
    if cfg.dump is not None and Path(cfg.dump).exists():
        wanted = set(regions)

        def full_entities() -> Iterator[Entity]:
            with open(cfg.dump, "rb") as fh:
                for item in parse_dump_stream(fh):
                    if isinstance(item, Entity) and item.id in wanted:
                        yield item

        entities = full_entities()
    else:
        # Degraded connectivity view: only claims the sidecar retained.
        entities = (s.entity for s in selected)

    report_data = compute_stats(
        _stage_records(cfg),
        entities,
        regions=regions,
        image_counts=image_counts,
    )
    write_stats(report_data, _workpath(cfg, "stats_table"), _workpath(cfg, "stats_json"))

    totals = report_data.region_totals()
    report = StageReport(stage="stats")
    report.counts = {
        "entities": report_data.entity_count,
        "templated": totals.templated,
        "open_ended": totals.open_ended,
        "mcq": totals.mcq,
        "open_ended_filtered": totals.open_ended_filtered,
        "mcq_filtered": totals.mcq_filtered,
    }
    return report


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

_RUNNERS: dict[str, Callable[[PipelineConfig], StageReport]] = {
    "select": run_select,
    "images": run_images,
    "generate": run_generate,
    "mcq": run_mcq,
    "refine": run_refine,
    "filter": run_filter,
    "sample": run_sample,
    "stats": run_stats,
}


def run_stage(stage: str, cfg: PipelineConfig) -> StageReport:
    if stage not in _RUNNERS:
        raise PipelineError(f"unknown stage {stage!r} (expected one of {STAGES})")
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    report = _RUNNERS[stage](cfg)
    logger.info("%s", report.line())
    return report


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _count_lines(path: Path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for line in fh if line.strip())


def write_run_manifest(cfg: PipelineConfig, reports: list[StageReport]) -> dict:
    """Write run_manifest.json: stage counts plus a digest of every stage file.

    Stage counts from earlier runs are kept so that single-stage reruns
    refresh their own entry without erasing the rest; file digests are always
    recomputed from what is on disk.
    """
    manifest: dict = {"stages": {}, "files": {}}
    out = _workpath(cfg, "run_manifest")
    if out.exists():
        try:
            manifest["stages"] = json.loads(out.read_text(encoding="utf-8")).get("stages", {})
        except (OSError, ValueError):
            logger.warning("existing %s was unreadable; rebuilding", out)
    manifest["stages"].update({r.stage: r.counts for r in reports})
    for key, name in FILES.items():
        if key == "run_manifest":
            continue
        path = cfg.workdir / name
        if path.exists():
            manifest["files"][name] = {
                "records": _count_lines(path),
                "sha256": _file_digest(path),
            }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def check_retention(cfg: PipelineConfig) -> None:
    """Per-(region, language) lineage counts must only shrink downstream.

    Open-ended lineage: templated >= refined >= filtered open-ended records.
    Choice lineage: generated >= filtered choice records.
    """
    def bucket_counts(path: Path, kinds: tuple[str, ...]) -> dict[tuple[str, str], int]:
        counts: dict[tuple[str, str], int] = {}
        if path.exists():
            for r in _load_record_file(path):
                if r.kind in kinds:
                    key = (r.region, r.language)
                    counts[key] = counts.get(key, 0) + 1
        return counts

    open_kinds = ("property", "identity")
    choice_kinds = ("mcq", "truefalse")
    templated = bucket_counts(_workpath(cfg, "templated"), open_kinds)
    refined = bucket_counts(_workpath(cfg, "refined"), open_kinds)
    filtered_open = bucket_counts(_workpath(cfg, "filtered"), open_kinds)
    generated = bucket_counts(_workpath(cfg, "mcq"), choice_kinds)
    filtered_choice = bucket_counts(_workpath(cfg, "filtered"), choice_kinds)

    for key in set(refined) | set(templated) | set(filtered_open):
        t, rf, fl = templated.get(key, 0), refined.get(key, 0), filtered_open.get(key, 0)
        if not (fl <= rf <= t):
            raise PipelineError(
                f"retention violated for {key}: filtered {fl} <= refined {rf} <= templated {t}"
            )
    for key in set(generated) | set(filtered_choice):
        g, fl = generated.get(key, 0), filtered_choice.get(key, 0)
        if not (fl <= g):
            raise PipelineError(
                f"retention violated for {key}: filtered {fl} <= generated {g}"
            )


def run_pipeline(cfg: PipelineConfig) -> list[StageReport]:
    """Run every stage in order, stopping at the first failure, then write
    the run manifest and verify retention monotonicity."""
    reports = []
    for stage in STAGES:
        reports.append(run_stage(stage, cfg))
    check_retention(cfg)
    write_run_manifest(cfg, reports)
    return reports
