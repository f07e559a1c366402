"""Synthetic knowledge-graph fixtures and an independent selection oracle.

Everything here works on raw dump dictionaries, deliberately bypassing the
library's own parsing and selection code, so tests can compare the two
implementations against each other.
"""

from __future__ import annotations

import json
import random


# ---------------------------------------------------------------------------
# raw dump item builders
# ---------------------------------------------------------------------------

def snak(dv_type: str, value) -> dict:
    return {"snaktype": "value", "datavalue": {"type": dv_type, "value": value}}


def claim(dv_type: str, value, rank: str = "normal") -> dict:
    return {"mainsnak": snak(dv_type, value), "rank": rank}


def entity_claim(qid: str, rank: str = "normal") -> dict:
    return claim("wikibase-entityid", {"entity-type": "item", "id": qid}, rank)


def numeric_entity_claim(number: int, rank: str = "normal") -> dict:
    return claim("wikibase-entityid", {"entity-type": "item", "numeric-id": number}, rank)


def string_claim(text: str, rank: str = "normal") -> dict:
    return claim("string", text, rank)


def mono_claim(text: str, language: str = "en") -> dict:
    return claim("monolingualtext", {"text": text, "language": language})


def quantity_claim(amount: str, unit_qid: str | None = None) -> dict:
    unit = f"http://www.wikidata.org/entity/{unit_qid}" if unit_qid else "1"
    return claim("quantity", {"amount": amount, "unit": unit})


def time_claim(stamp: str, precision: int = 11) -> dict:
    return claim("time", {"time": stamp, "precision": precision})


def coord_claim(lat: float, lon: float) -> dict:
    return claim("globecoordinate", {"latitude": lat, "longitude": lon})


def novalue_claim() -> dict:
    return {"mainsnak": {"snaktype": "novalue"}, "rank": "normal"}


def make_item(
    qid: str,
    labels: dict[str, str] | None = None,
    descriptions: dict[str, str] | None = None,
    aliases: dict[str, list[str]] | None = None,
    claims: dict[str, list[dict]] | None = None,
    sitelinks: dict[str, str] | None = None,
) -> dict:
    item: dict = {"id": qid, "type": "item"}
    item["labels"] = {
        lang: {"language": lang, "value": text} for lang, text in (labels or {}).items()
    }
    item["descriptions"] = {
        lang: {"language": lang, "value": text} for lang, text in (descriptions or {}).items()
    }
    item["aliases"] = {
        lang: [{"language": lang, "value": a} for a in alist]
        for lang, alist in (aliases or {}).items()
    }
    item["claims"] = claims or {}
    item["sitelinks"] = {
        site: {"site": site, "title": title} for site, title in (sitelinks or {}).items()
    }
    return item


def dump_text(items: list[dict], wrapper: bool = True) -> str:
    """Serialize items the way a full dump download looks on disk."""
    lines = []
    if wrapper:
        lines.append("[")
        lines.extend(json.dumps(item, ensure_ascii=False) + "," for item in items)
        lines.append("]")
    else:
        lines.extend(json.dumps(item, ensure_ascii=False) for item in items)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# randomized corpus
# ---------------------------------------------------------------------------

FILLER_QIDS = [f"Q9{n:04d}" for n in range(40)]


def random_kg(
    rng: random.Random,
    n_entities: int,
    regions: dict[str, list[str]],
    languages: list[str],
    properties: list[str],
) -> list[dict]:
    """A corpus where roughly 60% of items carry a region anchor claim and
    roughly 80% pass the language gate, with deprecated ranks, novalue snaks
    and numeric-id references sprinkled in."""
    region_names = list(regions)
    items = []
    for i in range(n_entities):
        qid = f"Q{1000 + i}"
        labels: dict[str, str] = {}
        descriptions: dict[str, str] = {}
        if rng.random() < 0.8:
            for lang in rng.sample(languages, rng.randint(1, len(languages))):
                labels[lang] = f"Name {i} {lang}"
            if rng.random() < 0.5:
                lang = rng.choice(languages)
                descriptions[lang] = f"thing number {i} in {lang}"
        else:
            labels["xx"] = f"Name {i} xx"

        claims: dict[str, list[dict]] = {}
        if rng.random() < 0.6:
            region = rng.choice(region_names)
            anchor = rng.choice(regions[region])
            pid = rng.choice(properties[: max(2, len(properties) // 2)])
            anchor_claim = (
                numeric_entity_claim(int(anchor[1:]))
                if rng.random() < 0.15
                else entity_claim(anchor)
            )
            if rng.random() < 0.2:
                claims.setdefault(pid, []).append(entity_claim(rng.choice(FILLER_QIDS)))
            claims.setdefault(pid, []).append(anchor_claim)
        for pid in rng.sample(properties, rng.randint(0, len(properties))):
            roll = rng.random()
            if roll < 0.5:
                extra = entity_claim(rng.choice(FILLER_QIDS))
            elif roll < 0.65:
                extra = string_claim(f"value-{i}-{pid}")
            elif roll < 0.75:
                extra = quantity_claim(f"+{rng.randint(1, 500)}")
            elif roll < 0.85:
                extra = time_claim(f"+{rng.randint(1200, 2020)}-01-01T00:00:00Z", 9)
            elif roll < 0.95:
                extra = entity_claim(rng.choice(FILLER_QIDS), rank="deprecated")
            else:
                extra = novalue_claim()
            claims.setdefault(pid, []).append(extra)

        sitelinks = {}
        if rng.random() < 0.5:
            lang = rng.choice(languages)
            sitelinks[f"{lang}wiki"] = f"Name {i}"
        items.append(make_item(qid, labels, descriptions, claims=claims, sitelinks=sitelinks))
    return items


# ---------------------------------------------------------------------------
# brute-force selection oracle (raw dicts in, tuples out)
# ---------------------------------------------------------------------------

def _raw_usable_values(item: dict, pid: str) -> list[dict]:
    usable = []
    for cl in item.get("claims", {}).get(pid, []):
        if cl.get("rank") == "deprecated":
            continue
        sn = cl.get("mainsnak", {})
        if sn.get("snaktype", "value") != "value":
            continue
        if "datavalue" not in sn:
            continue
        usable.append(sn["datavalue"])
    return usable


def _raw_ref_qid(datavalue: dict) -> str | None:
    if datavalue.get("type") != "wikibase-entityid":
        return None
    value = datavalue.get("value", {})
    if isinstance(value, dict):
        if "id" in value:
            return value["id"]
        if "numeric-id" in value:
            return f"Q{value['numeric-id']}"
    return None


def oracle_select(
    items: list[dict],
    regions: list[tuple[str, list[str]]],
    properties: list[str],
    languages: list[str],
) -> list[tuple[str, str, tuple[str, ...]]]:
    """Reference implementation of selection plus the per-region property cap.

    Returns (entity id, assigned region, capped eligible properties) in input
    order, matching what the library should produce for the same corpus.
    """
    anchor_of: dict[str, str] = {}
    for name, anchors in regions:
        for qid in anchors:
            anchor_of.setdefault(qid, name)

    picked: list[tuple[str, str, list[str]]] = []
    for item in items:
        has_lang = any(
            lang in item.get("labels", {}) or lang in item.get("descriptions", {})
            for lang in languages
        )
        if not has_lang:
            continue
        region = None
        for pid in properties:
            for dv in _raw_usable_values(item, pid):
                qid = _raw_ref_qid(dv)
                if qid is not None and qid in anchor_of:
                    region = anchor_of[qid]
                    break
            if region is not None:
                break
        if region is None:
            continue
        eligible = [pid for pid in properties if _raw_usable_values(item, pid)]
        picked.append((item["id"], region, eligible))

    counts: dict[str, list[int]] = {}
    for _, region, eligible in picked:
        counts.setdefault(region, []).append(len(eligible))
    cap = {
        region: sorted(values)[(len(values) - 1) // 2]
        for region, values in counts.items()
    }
    return [
        (qid, region, tuple(eligible[: cap[region]]))
        for qid, region, eligible in picked
    ]


# ---------------------------------------------------------------------------
# template fixtures
# ---------------------------------------------------------------------------

TEMPLATE_ROWS = [
    {
        "id": "birthplace-en",
        "scope": "property",
        "property": "P19",
        "language": "en",
        "question": "Where was this person born?",
        "answer": "{entity_name} was born in {property_value}.",
    },
    {
        "id": "identity-en",
        "scope": "identity",
        "language": "en",
        "question": "What is the entity shown in the image?",
        "answer": "The {entity_name}, {entity_description}.",
    },
    {
        "id": "country-en",
        "scope": "property",
        "property": "P17",
        "language": "en",
        "question": "Which country is this located in?",
        "answer": "{entity_name} is located in {property_value}.",
    },
    {
        "id": "creator-en",
        "scope": "property",
        "property": "P170",
        "language": "en",
        "question": "Who created the work shown here?",
        "answer": "{entity_name} was created by {property_value}.",
    },
    {
        "id": "birthplace-fr",
        "scope": "property",
        "property": "P19",
        "language": "fr",
        "question": "Où cette personne est-elle née ?",
        "answer": "{entity_name} est né à {property_value}.",
    },
    {
        "id": "identity-fr",
        "scope": "identity",
        "language": "fr",
        "question": "Quelle est l'entité visible sur l'image ?",
        "answer": "{entity_name}, {entity_description}.",
    },
    {
        "id": "country-hi",
        "scope": "property",
        "property": "P17",
        "language": "hi",
        "question": "यह किस देश में स्थित है?",
        "answer": "{entity_name} {property_value} में स्थित है।",
    },
]


def template_lines() -> str:
    return "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in TEMPLATE_ROWS)
