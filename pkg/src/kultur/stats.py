"""Dataset statistics: per-region and per-language tallies, connectivity
histogram and Wikipedia presence.

The region table mirrors the released-dataset accounting: entity and image
counts, then record counts per stage, where the *_F columns hold the records
that survived quality filtering.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .kg import Entity
from .records import CHOICE_KINDS, OPEN_ENDED_KINDS, DatasetRecord

logger = logging.getLogger(__name__)

REGION_COLUMNS = (
    "entities", "images", "templated", "open_ended", "mcq",
    "open_ended_filtered", "mcq_filtered",
)
LANGUAGE_COLUMNS = ("open_ended", "mcq", "open_ended_filtered", "mcq_filtered")


@dataclass
class RegionStats:
    entities: int = 0
    images: int = 0
    templated: int = 0
    open_ended: int = 0
    mcq: int = 0
    open_ended_filtered: int = 0
    mcq_filtered: int = 0


@dataclass
class LanguageStats:
    open_ended: int = 0
    mcq: int = 0
    open_ended_filtered: int = 0
    mcq_filtered: int = 0


@dataclass
class StatsReport:
    per_region: dict[str, RegionStats] = field(default_factory=dict)
    per_language: dict[str, LanguageStats] = field(default_factory=dict)
    connectivity: dict[int, int] = field(default_factory=dict)
    wikipedia_presence: float = 0.0
    entity_count: int = 0

    def region_totals(self) -> RegionStats:
        total = RegionStats()
        for row in self.per_region.values():
            for col in REGION_COLUMNS:
                setattr(total, col, getattr(total, col) + getattr(row, col))
        return total

    def language_totals(self) -> LanguageStats:
        total = LanguageStats()
        for row in self.per_language.values():
            for col in LANGUAGE_COLUMNS:
                setattr(total, col, getattr(total, col) + getattr(row, col))
        return total


class StatsConsistencyError(AssertionError):
    """The cross-checked totals disagree; indicates a tallying bug."""


def outgoing_link_count(e: Entity) -> int:
    """Number of outgoing entity references over all of an entity's claims."""
    return sum(
        1
        for values in e.claims.values()
        for v in values
        if v.kind == "entity-ref"
    )


def compute_stats(
    records: Iterable[DatasetRecord],
    entities: Iterable[Entity],
    regions: Mapping[str, str] | None = None,
    image_counts: Mapping[str, int] | None = None,
) -> StatsReport:
    """Tally records and entities into a report.

    ``regions`` maps entity id to assigned region and ``image_counts`` maps
    entity id to manifested image count; when given, the entity and image
    columns come from them. Without them both columns are derived from the
    records themselves (distinct entities, distinct image titles), which
    misses entities that produced no records.
    """
    report = StatsReport()
    region_entities: dict[str, set[str]] = {}
    region_images: dict[str, set[str]] = {}

    for r in records:
        row = report.per_region.setdefault(r.region, RegionStats())
        lang_row = report.per_language.setdefault(r.language, LanguageStats())
        region_entities.setdefault(r.region, set()).add(r.entity_id)
        if r.image:
            region_images.setdefault(r.region, set()).add(r.image)
        open_ended = r.kind in OPEN_ENDED_KINDS
        if r.stage == "templated":
            row.templated += 1
        elif r.stage == "refined":
            if open_ended:
                row.open_ended += 1
                lang_row.open_ended += 1
            else:
                row.mcq += 1
                lang_row.mcq += 1
        elif r.stage == "filtered":
            if open_ended:
                row.open_ended_filtered += 1
                lang_row.open_ended_filtered += 1
            else:
                row.mcq_filtered += 1
                lang_row.mcq_filtered += 1

    if regions is not None:
        by_region: dict[str, list[str]] = {}
        for entity_id, region in regions.items():
            by_region.setdefault(region, []).append(entity_id)
        for region, ids in by_region.items():
            row = report.per_region.setdefault(region, RegionStats())
            row.entities = len(ids)
            if image_counts is not None:
                row.images = sum(image_counts.get(i, 0) for i in ids)
    else:
        for region, ids in region_entities.items():
            report.per_region[region].entities = len(ids)
    if image_counts is None or regions is None:
        for region, titles in region_images.items():
            report.per_region[region].images = len(titles)

    presence = 0
    for e in entities:
        report.entity_count += 1
        if e.sitelinks:
            presence += 1
        links = outgoing_link_count(e)
        report.connectivity[links] = report.connectivity.get(links, 0) + 1
    report.wikipedia_presence = presence / report.entity_count if report.entity_count else 0.0

    _cross_check(report)
    return report


def _cross_check(report: StatsReport) -> None:
    """Region-wise and language-wise sums must describe the same records."""
    rt = report.region_totals()
    lt = report.language_totals()
    for col in LANGUAGE_COLUMNS:
        if getattr(rt, col) != getattr(lt, col):
            raise StatsConsistencyError(
                f"column {col}: region total {getattr(rt, col)} != "
                f"language total {getattr(lt, col)}"
            )
    if sum(report.connectivity.values()) != report.entity_count:
        raise StatsConsistencyError("connectivity histogram does not cover every entity")


_HEADERS = ("Entities", "Images", "Template QA", "Open-Ended", "MCQ",
            "Open-Ended_F", "MCQ_F")


def render_stats_table(report: StatsReport) -> str:
    """Readable tables: regions, languages, connectivity, presence."""
    lines: list[str] = []
    name_w = max([len("Region"), len("TOTAL")] + [len(k) for k in report.per_region])
    header = f"{'Region':<{name_w}}  " + "  ".join(f"{h:>12}" for h in _HEADERS)
    lines.append(header)
    lines.append("-" * len(header))

    def region_cells(row: RegionStats) -> str:
        return "  ".join(f"{getattr(row, col):>12}" for col in REGION_COLUMNS)

    for region in sorted(report.per_region):
        lines.append(f"{region:<{name_w}}  {region_cells(report.per_region[region])}")
    lines.append(f"{'TOTAL':<{name_w}}  {region_cells(report.region_totals())}")
    lines.append("")

    lang_w = max([len("Language"), len("TOTAL")] + [len(k) for k in report.per_language])
    lang_headers = ("Open-Ended", "MCQ", "Open-Ended_F", "MCQ_F")
    header = f"{'Language':<{lang_w}}  " + "  ".join(f"{h:>12}" for h in lang_headers)
    lines.append(header)
    lines.append("-" * len(header))

    def lang_cells(row: LanguageStats) -> str:
        return "  ".join(f"{getattr(row, col):>12}" for col in LANGUAGE_COLUMNS)

    for lang in sorted(report.per_language):
        lines.append(f"{lang:<{lang_w}}  {lang_cells(report.per_language[lang])}")
    lines.append(f"{'TOTAL':<{lang_w}}  {lang_cells(report.language_totals())}")
    lines.append("")

    lines.append("Outgoing links per entity:")
    for links in sorted(report.connectivity):
        lines.append(f"  {links:>4} links: {report.connectivity[links]} entities")
    with_links = report.entity_count
    lines.append(
        f"Wikipedia presence: {report.wikipedia_presence:.4f} "
        f"({round(report.wikipedia_presence * with_links)}/{with_links} entities with a sitelink)"
    )
    return "\n".join(lines) + "\n"


def stats_to_dict(report: StatsReport) -> dict:
    """Machine-readable mirror of the tables."""
    return {
        "per_region": {
            region: {col: getattr(row, col) for col in REGION_COLUMNS}
            for region, row in sorted(report.per_region.items())
        },
        "region_totals": {
            col: getattr(report.region_totals(), col) for col in REGION_COLUMNS
        },
        "per_language": {
            lang: {col: getattr(row, col) for col in LANGUAGE_COLUMNS}
            for lang, row in sorted(report.per_language.items())
        },
        "language_totals": {
            col: getattr(report.language_totals(), col) for col in LANGUAGE_COLUMNS
        },
        "connectivity": {str(k): v for k, v in sorted(report.connectivity.items())},
        "wikipedia_presence": report.wikipedia_presence,
        "entity_count": report.entity_count,
    }


def write_stats(report: StatsReport, table_path, json_path) -> None:
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write(render_stats_table(report))
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(stats_to_dict(report), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
