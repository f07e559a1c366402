"""Selection of culturally anchored entities from a parsed dump.

An entity is selected when one of the configured link properties carries a
direct claim to one of a region's anchor items (no transitive closure over
the graph), and the entity additionally exposes a label or description in at
least one of the target languages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from .kg import Entity, is_pid, is_qid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegionSpec:
    """A named region and the anchor item QIDs that identify it."""

    name: str
    anchors: frozenset[str]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("region name must be non-empty")
        if not self.anchors:
            raise ValueError(f"region {self.name!r} has no anchor items")
        for qid in self.anchors:
            if not is_qid(qid):
                raise ValueError(f"region {self.name!r}: anchor {qid!r} is not a QID")


@dataclass
class SelectionConfig:
    """Inputs to cultural selection.

    ``properties`` is an ordered priority list: when an entity links to
    anchors of several regions, the earliest property (then the earliest
    claim) decides the assigned region.
    """

    regions: list[RegionSpec]
    properties: list[str]
    languages: list[str]

    def __post_init__(self) -> None:
        if not self.regions:
            raise ValueError("at least one region is required")
        if not self.properties:
            raise ValueError("at least one link property is required")
        if not self.languages:
            raise ValueError("at least one target language is required")
        for pid in self.properties:
            if not is_pid(pid):
                raise ValueError(f"link property {pid!r} is not a PID")
        names = [r.name for r in self.regions]
        if len(names) != len(set(names)):
            raise ValueError("region names must be unique")

    def anchor_index(self) -> dict[str, str]:
        """Reverse map anchor QID to region name; first region wins on overlap."""
        index: dict[str, str] = {}
        for region in self.regions:
            for qid in region.anchors:
                if qid in index and index[qid] != region.name:
                    logger.warning(
                        "anchor %s claimed by both %s and %s; keeping %s",
                        qid, index[qid], region.name, index[qid],
                    )
                    continue
                index.setdefault(qid, region.name)
        return index


@dataclass
class SelectedEntity:
    """A matched entity together with its region assignment."""

    entity: Entity
    assigned_region: str
    matched_pairs: list[tuple[str, str]] = field(default_factory=list)
    eligible_properties: list[str] = field(default_factory=list)

    @property
    def id(self) -> str:
        return self.entity.id


def has_target_language_presence(e: Entity, languages: Iterable[str]) -> bool:
    """True when the entity carries a label or description in any target language."""
    for lang in languages:
        if e.labels.get(lang) or e.descriptions.get(lang):
            return True
    return False


def match_region(e: Entity, config: SelectionConfig, anchor_index: dict[str, str] | None = None):
    """Return (assigned region, matched (property, anchor) pairs) or None.

    Matching is direct claim equality against anchor items. All matching
    pairs are reported in priority order; the first decides the assignment.
    """
    index = anchor_index if anchor_index is not None else config.anchor_index()
    pairs: list[tuple[str, str]] = []
    for pid in config.properties:
        for value in e.claims.get(pid, ()):
            if value.kind == "entity-ref" and value.value in index:
                pairs.append((pid, value.value))
    if not pairs:
        return None
    return index[pairs[0][1]], pairs


def select_cultural_entities(
    entities: Iterable[Entity],
    config: SelectionConfig,
) -> Iterator[SelectedEntity]:
    """Stream selected entities; order follows the input stream."""
    index = config.anchor_index()
    property_order = {pid: i for i, pid in enumerate(config.properties)}
    for e in entities:
        matched = match_region(e, config, index)
        if matched is None:
            continue
        if not has_target_language_presence(e, config.languages):
            continue
        region, pairs = matched
        eligible = sorted(
            (pid for pid in e.claims if pid in property_order),
            key=property_order.__getitem__,
        )
        yield SelectedEntity(
            entity=e,
            assigned_region=region,
            matched_pairs=pairs,
            eligible_properties=eligible,
        )


def country_property_median(selected: Iterable[SelectedEntity]) -> dict[str, int]:
    """Lower median of eligible-property counts, per assigned region.

    The lower median of a sorted multiset of n counts is the element at index
    (n - 1) // 2, so at least half of a region's entities sit at or below it.
    """
    counts: dict[str, list[int]] = {}
    for s in selected:
        counts.setdefault(s.assigned_region, []).append(len(s.eligible_properties))
    medians: dict[str, int] = {}
    for region, values in counts.items():
        values.sort()
        medians[region] = values[(len(values) - 1) // 2]
    return medians


def cap_entity_properties(
    selected: Iterable[SelectedEntity],
    medians: dict[str, int],
) -> list[SelectedEntity]:
    """Trim each entity's eligible properties to its region's median count.

    Priority order is preserved, so trimming keeps the earliest properties.
    Entities whose region has no recorded median pass through untrimmed.
    """
    capped: list[SelectedEntity] = []
    for s in selected:
        limit = medians.get(s.assigned_region)
        if limit is not None and len(s.eligible_properties) > limit:
            s = replace(s, eligible_properties=s.eligible_properties[:limit])
        capped.append(s)
    return capped
