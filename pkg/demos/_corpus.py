"""Shared miniature corpus for the demo scripts.

Builds raw dump items the way they appear in a real Wikidata JSON dump, plus
a ready-to-run workspace (dump, templates, image listings, config) so the
pipeline demos work fully offline against the stub model backend.
"""

from __future__ import annotations

import json
from pathlib import Path


def _snak(dv_type: str, value) -> dict:
    return {"snaktype": "value", "datavalue": {"type": dv_type, "value": value}}


def claim(dv_type: str, value, rank: str = "normal") -> dict:
    return {"mainsnak": _snak(dv_type, value), "rank": rank}


def entity_claim(qid: str) -> dict:
    return claim("wikibase-entityid", {"entity-type": "item", "id": qid})


def string_claim(text: str) -> dict:
    return claim("string", text)


def make_item(
    qid: str,
    labels: dict[str, str] | None = None,
    descriptions: dict[str, str] | None = None,
    aliases: dict[str, list[str]] | None = None,
    claims: dict[str, list[dict]] | None = None,
    sitelinks: dict[str, str] | None = None,
) -> dict:
    return {
        "id": qid,
        "type": "item",
        "labels": {k: {"language": k, "value": v} for k, v in (labels or {}).items()},
        "descriptions": {
            k: {"language": k, "value": v} for k, v in (descriptions or {}).items()
        },
        "aliases": {
            k: [{"language": k, "value": a} for a in v]
            for k, v in (aliases or {}).items()
        },
        "claims": claims or {},
        "sitelinks": {s: {"site": s, "title": t} for s, t in (sitelinks or {}).items()},
    }


REGIONS = {"India": ["Q668"], "Germany": ["Q183"]}
PROPERTIES = ["P27", "P17", "P19", "P170"]
LANGUAGES = ["en", "hi", "fr"]


def corpus_items() -> list[dict]:
    """Five selectable entities over two regions plus the items they link to."""
    return [
        make_item(
            "Q937",
            labels={"en": "Albert Einstein", "fr": "Albert Einstein"},
            descriptions={"en": "theoretical physicist"},
            aliases={"en": ["Einstein"]},
            claims={
                "P27": [entity_claim("Q183")],
                "P19": [entity_claim("Q3012")],
                "P18": [string_claim("Albert Einstein Head.jpg")],
            },
            sitelinks={"enwiki": "Albert Einstein"},
        ),
        make_item(
            "Q9141",
            labels={"en": "Taj Mahal", "hi": "ताज महल"},
            descriptions={"en": "a 17th-century mausoleum in India"},
            claims={
                "P17": [entity_claim("Q668")],
                "P18": [string_claim("Taj Mahal exterior.jpg")],
                "P373": [string_claim("Taj Mahal")],
            },
            sitelinks={"enwiki": "Taj Mahal", "hiwiki": "ताज महल"},
        ),
        make_item(
            "Q5460",
            labels={"en": "Hampi", "hi": "हम्पी"},
            descriptions={"en": "ruined medieval city in Karnataka"},
            claims={"P17": [entity_claim("Q668")], "P373": [string_claim("Hampi")]},
            sitelinks={"enwiki": "Hampi"},
        ),
        make_item(
            "Q4606",
            labels={"en": "Marlene Dietrich", "fr": "Marlene Dietrich"},
            descriptions={"en": "German-American actress and singer"},
            claims={"P27": [entity_claim("Q183")], "P19": [entity_claim("Q64")]},
        ),
        make_item(
            "Q82425",
            labels={"en": "Brandenburg Gate", "fr": "Porte de Brandebourg"},
            descriptions={"en": "neoclassical monument in Berlin"},
            claims={
                "P17": [entity_claim("Q183")],
                "P18": [string_claim("Brandenburger Tor abends.jpg")],
            },
            sitelinks={"enwiki": "Brandenburg Gate"},
        ),
        # Link targets only; no anchor claims of their own.
        make_item("Q668", labels={"en": "India", "hi": "भारत", "fr": "Inde"}),
        make_item("Q183", labels={"en": "Germany", "hi": "जर्मनी", "fr": "Allemagne"}),
        make_item("Q3012", labels={"en": "Ulm, Germany", "fr": "Ulm, Allemagne"}),
        make_item("Q64", labels={"en": "Berlin", "fr": "Berlin"}),
    ]


def dump_text(items: list[dict]) -> str:
    lines = ["["] + [json.dumps(i, ensure_ascii=False) + "," for i in items] + ["]"]
    return "\n".join(lines) + "\n"


TEMPLATES = [
    {
        "id": "birthplace-en", "scope": "property", "property": "P19", "language": "en",
        "question": "Where was this person born?",
        "answer": "{entity_name} was born in {property_value}.",
    },
    {
        "id": "country-en", "scope": "property", "property": "P17", "language": "en",
        "question": "Which country is this located in?",
        "answer": "{entity_name} is located in {property_value}.",
    },
    {
        "id": "identity-en", "scope": "identity", "language": "en",
        "question": "What is the entity shown in the image?",
        "answer": "The {entity_name}, {entity_description}.",
    },
    {
        "id": "country-hi", "scope": "property", "property": "P17", "language": "hi",
        "question": "यह किस देश में स्थित है?",
        "answer": "{entity_name} {property_value} में स्थित है।",
    },
]


def write_demo_workspace(root: Path, budget: int = 10) -> Path:
    """Write dump, templates, listings and a record-mode config; returns the
    config path. Everything points at the offline stub backend."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "dump.json").write_text(dump_text(corpus_items()), encoding="utf-8")
    with open(root / "templates.jsonl", "w", encoding="utf-8") as fh:
        for row in TEMPLATES:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    with open(root / "listings.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"category": "Taj Mahal",
                             "files": ["Taj door.jpg", "Taj aerial.jpg"]}) + "\n")
        fh.write(json.dumps({"category": "Hampi",
                             "files": ["Virupaksha temple.jpg", "Hampi chariot.jpg"]}) + "\n")
    config = {
        "workdir": "work",
        "dump": "dump.json",
        "templates": "templates.jsonl",
        "regions": REGIONS,
        "properties": PROPERTIES,
        "languages": LANGUAGES,
        "images": {"listing_store": "listings.jsonl", "max_per_entity": 3},
        "gateway": {
            "mode": "record",
            "store": "gateway_store.jsonl",
            "clients": {"default": {"endpoint": "stub:dry-run", "model": "offline"}},
        },
        "sampling": {"t_region": 4.0, "t_lang": 1.5, "budget": budget, "seed": 7},
        "mcq": {"ratio": 0.6},
    }
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path
