"""Dataset record model, line-delimited serialization, and MCQ shuffling.

One record is one question/answer unit tied to an entity, a region, a
language and (usually) an image. Records move through three stages,
templated, refined, filtered, and keep their id across stages so retention
is auditable per lineage.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import logging
import random
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Union

from .kg import ParseDiagnostic
from .parsing import FilterVerdict, McqItem, RefinedQa, TfItem

logger = logging.getLogger(__name__)

KINDS = ("property", "identity", "mcq", "truefalse")
STAGES = ("templated", "refined", "filtered")

OPEN_ENDED_KINDS = ("property", "identity")
CHOICE_KINDS = ("mcq", "truefalse")

_PERMUTATIONS = list(itertools.permutations(range(4)))


class RecordInvariantError(ValueError):
    """A record violates the dataset invariants; carries the record id."""

    def __init__(self, record_id: str, reason: str) -> None:
        super().__init__(f"record {record_id or '<no id>'}: {reason}")
        self.record_id = record_id
        self.reason = reason


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    entity_id: str
    region: str
    language: str
    kind: str
    question: str
    answer: str
    stage: str
    property: str | None = None
    image: str | None = None
    options: tuple[str, str, str, str] | None = None
    correct_index: int | None = None
    explanation: str | None = None
    verdict: FilterVerdict | None = None


def record_id(
    entity_id: str,
    kind: str,
    property: str | None,
    language: str,
    image: str | None,
    question: str,
) -> str:
    """Stable id over the fields that define a record's lineage.

    The question text is the one the record entered the pipeline with;
    refinement and filtering keep the id.
    """
    payload = json.dumps(
        [entity_id, kind, property or "", language, image or "", question],
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()[:16]


def validate_record(r: DatasetRecord) -> None:
    """Raise RecordInvariantError when a record is internally inconsistent."""
    def fail(reason: str):
        raise RecordInvariantError(r.id, reason)

    if not r.id:
        fail("empty id")
    if not r.entity_id:
        fail("empty entity_id")
    if not r.region:
        fail("empty region")
    if not r.language:
        fail("empty language")
    if r.kind not in KINDS:
        fail(f"unknown kind {r.kind!r}")
    if r.stage not in STAGES:
        fail(f"unknown stage {r.stage!r}")
    if not r.question.strip():
        fail("empty question")
    if not r.answer.strip():
        fail("empty answer")
    if r.kind == "mcq":
        if r.options is None or r.correct_index is None:
            fail("mcq record requires options and correct_index")
        if len(r.options) != 4 or any(not o.strip() for o in r.options):
            fail("mcq record requires exactly 4 non-empty options")
        if not 0 <= r.correct_index <= 3:
            fail(f"correct_index {r.correct_index} out of range")
    else:
        if r.options is not None or r.correct_index is not None:
            fail(f"{r.kind} record must not carry options")
    if r.kind == "property" and not r.property:
        fail("property record requires a property id")
    if r.kind == "identity" and r.property:
        fail("identity record must not carry a property id")
    if r.kind == "truefalse" and r.answer not in ("True", "False"):
        fail(f"truefalse answer must be True or False, got {r.answer!r}")
    if r.stage == "filtered":
        if r.verdict is None:
            fail("filtered record requires a verdict")
        if not r.verdict.match:
            fail("filtered record requires verdict.match = true")


def record_to_dict(r: DatasetRecord) -> dict:
    obj: dict = {
        "id": r.id,
        "entity_id": r.entity_id,
        "region": r.region,
        "language": r.language,
        "kind": r.kind,
        "question": r.question,
        "answer": r.answer,
        "stage": r.stage,
    }
    if r.property is not None:
        obj["property"] = r.property
    if r.image is not None:
        obj["image"] = r.image
    if r.options is not None:
        obj["options"] = list(r.options)
    if r.correct_index is not None:
        obj["correct_index"] = r.correct_index
    if r.explanation is not None:
        obj["explanation"] = r.explanation
    if r.verdict is not None:
        v: dict = {
            "match": r.verdict.match,
            "issue": r.verdict.issue,
            "explanation": r.verdict.explanation,
        }
        if r.verdict.culturally_relevant is not None:
            v["culturally_relevant"] = r.verdict.culturally_relevant
        obj["verdict"] = v
    return obj


def record_from_dict(obj: dict) -> DatasetRecord:
    verdict = None
    if "verdict" in obj and obj["verdict"] is not None:
        v = obj["verdict"]
        verdict = FilterVerdict(
            match=bool(v["match"]),
            issue=v.get("issue", "None"),
            explanation=v.get("explanation", ""),
            culturally_relevant=v.get("culturally_relevant"),
        )
    options = obj.get("options")
    if options is not None:
        if not isinstance(options, list) or len(options) != 4:
            raise ValueError("options must be a list of 4 strings")
        options = tuple(options)
    return DatasetRecord(
        id=obj["id"],
        entity_id=obj["entity_id"],
        region=obj["region"],
        language=obj["language"],
        kind=obj["kind"],
        question=obj["question"],
        answer=obj["answer"],
        stage=obj["stage"],
        property=obj.get("property"),
        image=obj.get("image"),
        options=options,
        correct_index=obj.get("correct_index"),
        explanation=obj.get("explanation"),
        verdict=verdict,
    )


def _as_text_stream(sink, mode: str):
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        return open(sink, mode, encoding="utf-8"), True
    if isinstance(sink, io.TextIOBase):
        return sink, False
    if hasattr(sink, "read") or hasattr(sink, "write"):
        return io.TextIOWrapper(sink, encoding="utf-8"), False
    raise TypeError(f"expected a path or stream, got {type(sink).__name__}")


def write_records(records: Iterable[DatasetRecord], sink) -> int:
    """Write records one JSON object per line; returns the count written.

    Every record is validated first; an invariant violation aborts the write
    naming the offending record. Lines are newline-terminated as they go,
    so a crash can only ever truncate the final line.
    """
    fh, owned = _as_text_stream(sink, "w")
    count = 0
    try:
        for r in records:
            validate_record(r)
            fh.write(json.dumps(record_to_dict(r), ensure_ascii=False) + "\n")
            count += 1
        fh.flush()
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper):
            fh.detach()
    return count


def read_records(source) -> Iterator[Union[DatasetRecord, ParseDiagnostic]]:
    """Read records written by :func:`write_records`.

    Malformed lines become diagnostics and reading continues. A final line
    with no trailing newline that also fails to parse is flagged as a
    truncated tail, which is how an interrupted writer shows up.
    """
    fh, owned = _as_text_stream(source, "r")
    try:
        for line_no, raw in enumerate(fh, start=1):
            complete = raw.endswith("\n")
            line = raw.strip()
            if not line:
                continue
            try:
                r = record_from_dict(json.loads(line))
                validate_record(r)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if not complete:
                    yield ParseDiagnostic(line=line_no, reason="truncated-tail")
                else:
                    yield ParseDiagnostic(line=line_no, reason=f"unreadable record: {exc}")
                continue
            yield r
    finally:
        if owned:
            fh.close()
        elif isinstance(fh, io.TextIOWrapper):
            fh.detach()


def shuffle_mcq_options(r: DatasetRecord, seed: int) -> DatasetRecord:
    """Return the record with options permuted by a seeded uniform draw.

    All 24 arrangements are equally likely; correct_index follows the correct
    option to its new slot and nothing else changes.
    """
    if r.kind != "mcq":
        raise RecordInvariantError(r.id, f"cannot shuffle options of kind {r.kind!r}")
    assert r.options is not None and r.correct_index is not None
    perm = _PERMUTATIONS[random.Random(seed).randrange(len(_PERMUTATIONS))]
    new_options = tuple(r.options[perm[i]] for i in range(4))
    new_correct = perm.index(r.correct_index)
    return replace(r, options=new_options, correct_index=new_correct)


def derive_refined(source: DatasetRecord, refined: RefinedQa) -> DatasetRecord:
    """Stage transition templated -> refined; the id stays for lineage."""
    if source.stage != "templated":
        raise RecordInvariantError(source.id, f"cannot refine a {source.stage} record")
    return replace(source, question=refined.question, answer=refined.answer, stage="refined")


def derive_filtered(source: DatasetRecord, verdict: FilterVerdict) -> DatasetRecord:
    """Stage transition refined -> filtered; only matching verdicts pass."""
    if source.stage != "refined":
        raise RecordInvariantError(source.id, f"cannot filter a {source.stage} record")
    if not verdict.match:
        raise RecordInvariantError(source.id, "filtered stage requires verdict.match = true")
    return replace(source, stage="filtered", verdict=verdict)


def mcq_record(source: DatasetRecord, item: McqItem) -> DatasetRecord:
    """A new multiple-choice record seeded from an open-ended one.

    The item is model-generated, so it enters at the refined stage with a
    fresh id keyed to its own question text; entity, region, language and
    image carry over from the source.
    """
    return DatasetRecord(
        id=record_id(source.entity_id, "mcq", source.property, source.language,
                     source.image, item.question),
        entity_id=source.entity_id,
        region=source.region,
        language=source.language,
        kind="mcq",
        question=item.question,
        answer=item.options[item.correct_index],
        stage="refined",
        property=source.property,
        image=source.image,
        options=item.options,
        correct_index=item.correct_index,
        explanation=item.explanation,
    )


def tf_record(source: DatasetRecord, item: TfItem) -> DatasetRecord:
    """A new true/false record seeded from an open-ended one."""
    return DatasetRecord(
        id=record_id(source.entity_id, "truefalse", source.property, source.language,
                     source.image, item.text),
        entity_id=source.entity_id,
        region=source.region,
        language=source.language,
        kind="truefalse",
        question=item.text,
        answer="True" if item.answer else "False",
        stage="refined",
        property=source.property,
        image=source.image,
        explanation=item.explanation,
    )
