"""Shared fixtures: a small handcrafted corpus and ready-to-run workspaces."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from synth import entity_claim, make_item, string_claim

CORPUS_REGIONS = {"India": ["Q668"], "Germany": ["Q183"]}
CORPUS_PROPERTIES = ["P27", "P17", "P19", "P170"]
CORPUS_LANGUAGES = ["en", "hi", "fr"]

TAJ_LISTING = [
    "Taj door.jpg",
    "Taj_Mahal_exterior.jpg",   # duplicate of the claim image after normalization
    "Taj aerial.jpg",
    "Taj Mahal at dawn.jpg",
]
HAMPI_LISTING = ["Virupaksha temple.jpg", "Hampi chariot.jpg"]


def corpus_items() -> list[dict]:
    """Five selectable entities over two regions plus referenced-only items."""
    return [
        make_item(
            "Q937",
            labels={"en": "Albert Einstein", "fr": "Albert Einstein", "de": "Albert Einstein"},
            descriptions={"en": "theoretical physicist"},
            aliases={"en": ["Einstein"]},
            claims={
                "P27": [entity_claim("Q183")],
                "P19": [entity_claim("Q3012")],
                "P18": [string_claim("Albert Einstein Head.jpg")],
            },
            sitelinks={"enwiki": "Albert Einstein", "frwiki": "Albert Einstein"},
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
            claims={
                "P17": [entity_claim("Q668")],
                "P373": [string_claim("Hampi")],
            },
            sitelinks={"enwiki": "Hampi"},
        ),
        make_item(
            "Q4606",
            labels={"en": "Marlene Dietrich", "fr": "Marlene Dietrich"},
            descriptions={"en": "German-American actress and singer"},
            claims={
                "P27": [entity_claim("Q183")],
                "P19": [entity_claim("Q64")],
            },
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
        # Referenced-only items; no anchor claims, so never selected.
        make_item("Q668", labels={"en": "India", "hi": "भारत", "fr": "Inde"}),
        make_item("Q183", labels={"en": "Germany", "hi": "जर्मनी", "fr": "Allemagne"}),
        make_item("Q3012", labels={"en": "Ulm, Germany", "fr": "Ulm, Allemagne"}),
        make_item("Q64", labels={"en": "Berlin", "fr": "Berlin"}),
    ]


def write_workspace(root: Path, mode: str = "record", workdir: str = "work",
                    budget: int = 12, seed: int = 7) -> Path:
    """Lay out dump, templates, listings and a config; returns the config path.

    Shared inputs are written only once so a record-mode run and a later
    replay-mode run can point at the same stores.
    """
    from synth import dump_text, template_lines

    root.mkdir(parents=True, exist_ok=True)
    dump = root / "dump.json"
    if not dump.exists():
        dump.write_text(dump_text(corpus_items()), encoding="utf-8")
    templates = root / "templates.jsonl"
    if not templates.exists():
        templates.write_text(template_lines(), encoding="utf-8")
    listings = root / "listings.jsonl"
    if not listings.exists():
        with open(listings, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"category": "Taj Mahal", "files": TAJ_LISTING}) + "\n")
            fh.write(json.dumps({"category": "Hampi", "files": HAMPI_LISTING}) + "\n")

    config = {
        "workdir": workdir,
        "dump": "dump.json",
        "templates": "templates.jsonl",
        "regions": CORPUS_REGIONS,
        "properties": CORPUS_PROPERTIES,
        "languages": CORPUS_LANGUAGES,
        "images": {"listing_store": "listings.jsonl", "max_per_entity": 3},
        "gateway": {
            "mode": mode,
            "store": "gateway_store.jsonl",
            "clients": {"default": {"endpoint": "stub:dry-run", "model": "offline"}},
        },
        "sampling": {"t_region": 4.0, "t_lang": 1.5, "budget": budget, "seed": seed},
        "mcq": {"ratio": 0.6},
    }
    path = root / f"config_{mode}_{workdir}.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    """Config path for a record-mode workspace under tmp_path."""
    return write_workspace(tmp_path)
