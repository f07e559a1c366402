"""Streaming ingestion of Wikidata-style entity dumps.

Parses either plain line-delimited entity objects or the array-wrapped dump
convention (opening ``[`` line, one entity object per line with a trailing
comma, closing ``]`` line) into a normalized in-pipeline entity model. Memory
use is bounded by the longest single line, never the file.
"""

from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

logger = logging.getLogger(__name__)

QID_RE = re.compile(r"^Q[0-9]+$")
PID_RE = re.compile(r"^P[0-9]+$")


def is_qid(value: str) -> bool:
    return bool(QID_RE.match(value))


def is_pid(value: str) -> bool:
    return bool(PID_RE.match(value))


@dataclass(frozen=True)
class ClaimValue:
    """One normalized claim value.

    ``kind`` is one of ``entity-ref``, ``text``, ``quantity``, ``time``,
    ``coordinate``, ``other``. ``value`` holds the QID for entity-refs, the
    string payload for text/other, the decimal amount string for quantities
    and the timestamp string for times.
    """

    kind: str
    value: str = ""
    unit: str | None = None        # unit entity QID for quantities
    precision: int | None = None   # time precision (9=year, 10=month, 11=day)
    lat: float | None = None
    lon: float | None = None

    @classmethod
    def entity_ref(cls, qid: str) -> "ClaimValue":
        return cls(kind="entity-ref", value=qid)

    @classmethod
    def text(cls, s: str) -> "ClaimValue":
        return cls(kind="text", value=s)

    @classmethod
    def quantity(cls, amount: str, unit: str | None = None) -> "ClaimValue":
        return cls(kind="quantity", value=amount, unit=unit)

    @classmethod
    def time(cls, stamp: str, precision: int) -> "ClaimValue":
        return cls(kind="time", value=stamp, precision=precision)

    @classmethod
    def coordinate(cls, lat: float, lon: float) -> "ClaimValue":
        return cls(kind="coordinate", lat=lat, lon=lon)

    @classmethod
    def other(cls, raw: str) -> "ClaimValue":
        return cls(kind="other", value=raw)


@dataclass
class Entity:
    """Normalized knowledge-graph node."""

    id: str
    labels: dict[str, str] = field(default_factory=dict)
    descriptions: dict[str, str] = field(default_factory=dict)
    aliases: dict[str, list[str]] = field(default_factory=dict)
    claims: dict[str, list[ClaimValue]] = field(default_factory=dict)
    sitelinks: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParseDiagnostic:
    """A recoverable per-line parse failure; the stream continues past it."""

    line: int
    reason: str


DumpItem = Union[Entity, ParseDiagnostic]


def _term_map(raw: object) -> dict[str, str]:
    """Flatten a labels/descriptions dump block to {lang: value}."""
    out: dict[str, str] = {}
    if not isinstance(raw, dict):
        return out
    for lang, term in raw.items():
        if not lang:
            continue
        if isinstance(term, dict):
            value = term.get("value")
        else:
            value = term
        if isinstance(value, str) and value:
            out[lang.lower()] = value
    return out


def _alias_map(raw: object) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    if not isinstance(raw, dict):
        return out
    for lang, items in raw.items():
        if not lang or not isinstance(items, list):
            continue
        values = []
        for item in items:
            value = item.get("value") if isinstance(item, dict) else item
            if isinstance(value, str) and value:
                values.append(value)
        if values:
            out[lang.lower()] = values
    return out


def _sitelink_map(raw: object) -> dict[str, str]:
    out: dict[str, str] = {}
    if not isinstance(raw, dict):
        return out
    for site, link in raw.items():
        if not site:
            continue
        title = link.get("title") if isinstance(link, dict) else link
        if isinstance(title, str) and title:
            out[site] = title
    return out


def _claim_value(datavalue: dict) -> ClaimValue:
    """Normalize one mainsnak datavalue; unknown shapes become ``other``."""
    dtype = datavalue.get("type")
    value = datavalue.get("value")
    if dtype == "wikibase-entityid" and isinstance(value, dict):
        qid = value.get("id")
        if not isinstance(qid, str):
            numeric = value.get("numeric-id")
            qid = f"Q{numeric}" if isinstance(numeric, int) else ""
        if is_qid(qid):
            return ClaimValue.entity_ref(qid)
        return ClaimValue.other(json.dumps(value, ensure_ascii=False, sort_keys=True))
    if dtype == "string" and isinstance(value, str):
        return ClaimValue.text(value)
    if dtype == "monolingualtext" and isinstance(value, dict):
        text = value.get("text")
        if isinstance(text, str):
            return ClaimValue.text(text)
    if dtype == "quantity" and isinstance(value, dict):
        amount = value.get("amount")
        if isinstance(amount, str):
            unit = value.get("unit")
            unit_qid = None
            if isinstance(unit, str) and unit not in ("", "1"):
                tail = unit.rsplit("/", 1)[-1]
                if is_qid(tail):
                    unit_qid = tail
            return ClaimValue.quantity(amount, unit_qid)
    if dtype == "time" and isinstance(value, dict):
        stamp = value.get("time")
        precision = value.get("precision")
        if isinstance(stamp, str) and isinstance(precision, int):
            return ClaimValue.time(stamp, precision)
    if dtype == "globecoordinate" and isinstance(value, dict):
        lat = value.get("latitude")
        lon = value.get("longitude")
        if (
            isinstance(lat, (int, float))
            and isinstance(lon, (int, float))
            and -90.0 <= lat <= 90.0
            and -180.0 <= lon <= 180.0
        ):
            return ClaimValue.coordinate(float(lat), float(lon))
    return ClaimValue.other(json.dumps(value, ensure_ascii=False, sort_keys=True))


def _claims_map(raw: object) -> dict[str, list[ClaimValue]]:
    out: dict[str, list[ClaimValue]] = {}
    if not isinstance(raw, dict):
        return out
    for pid, statements in raw.items():
        if not is_pid(pid) or not isinstance(statements, list):
            continue
        values: list[ClaimValue] = []
        for statement in statements:
            if not isinstance(statement, dict):
                continue
            # Deprecated statements contradict treating the graph as ground
            # truth; preferred and normal ranks are kept.
            if statement.get("rank") == "deprecated":
                continue
            snak = statement.get("mainsnak")
            if not isinstance(snak, dict) or snak.get("snaktype") != "value":
                continue
            datavalue = snak.get("datavalue")
            if isinstance(datavalue, dict):
                values.append(_claim_value(datavalue))
        if values:
            out[pid] = values
    return out


def entity_from_dump(obj: dict) -> Entity:
    """Build a normalized Entity from one raw dump object.

    Raises ValueError when the object cannot satisfy the entity invariants.
    """
    eid = obj.get("id")
    if not isinstance(eid, str) or not is_qid(eid):
        raise ValueError(f"invalid entity id: {eid!r}")
    return Entity(
        id=eid,
        labels=_term_map(obj.get("labels")),
        descriptions=_term_map(obj.get("descriptions")),
        aliases=_alias_map(obj.get("aliases")),
        claims=_claims_map(obj.get("claims")),
        sitelinks=_sitelink_map(obj.get("sitelinks")),
    )


def _line_iter(source) -> Iterator[str]:
    if isinstance(source, io.TextIOBase):
        return iter(source)
    if hasattr(source, "read") and hasattr(source, "readable"):
        return iter(io.TextIOWrapper(source, encoding="utf-8"))
    if isinstance(source, (str, bytes)):
        raise TypeError("parse_dump_stream expects a stream or line iterable, not a path/blob")
    return iter(source)


def parse_dump_stream(
    source,
    tolerate_array_wrapper: bool = True,
) -> Iterator[DumpItem]:
    """Stream entities out of a dump, one line at a time.

    ``source`` may be a binary stream (decoded as UTF-8), a text stream, or an
    iterable of lines. Malformed lines yield :class:`ParseDiagnostic` and the
    stream continues; only an I/O failure of the underlying source aborts.
    Callers supply decompressed bytes; compression is out of contract.
    """
    for line_no, raw in enumerate(_line_iter(source), start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        line = raw.strip()
        if not line:
            continue
        if tolerate_array_wrapper:
            if line in ("[", "]"):
                continue
            if line.endswith(","):
                line = line[:-1].rstrip()
                if not line:
                    continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield ParseDiagnostic(line=line_no, reason=f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield ParseDiagnostic(line=line_no, reason="entity object is not a JSON object")
            continue
        try:
            yield entity_from_dump(obj)
        except ValueError as exc:
            yield ParseDiagnostic(line=line_no, reason=str(exc))


def iter_entities(items: Iterable[DumpItem]) -> Iterator[Entity]:
    """Drop diagnostics from a parse stream, keeping only entities."""
    for item in items:
        if isinstance(item, Entity):
            yield item


def entity_labels_in(e: Entity, langs: Iterable[str]) -> dict[str, str]:
    """Restrict an entity's labels to the given language codes."""
    wanted = set(langs)
    return {lang: text for lang, text in e.labels.items() if lang in wanted}


def claim_entity_refs(e: Entity, p: str) -> list[str]:
    """Entity QIDs referenced under property ``p``, in claim order."""
    return [v.value for v in e.claims.get(p, ()) if v.kind == "entity-ref"]
