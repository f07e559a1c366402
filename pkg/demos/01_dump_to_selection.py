"""Stream a raw JSON dump and pick the culturally grounded entities.

Walks the first pipeline step by hand: parse the dump line by line, keep
entities whose claims point at a region's anchor items, then trim each
entity's usable property list to its region's median so no single entity
dominates the question volume later.
"""

from __future__ import annotations

import io

from _corpus import LANGUAGES, PROPERTIES, REGIONS, corpus_items, dump_text
from kultur.kg import iter_entities, parse_dump_stream
from kultur.select import (
    RegionSpec,
    SelectionConfig,
    cap_entity_properties,
    country_property_median,
    select_cultural_entities,
)


def main() -> None:
    raw = dump_text(corpus_items())
    print(f"dump: {len(raw)} bytes, first line {raw.splitlines()[0]!r}")

    entities = list(iter_entities(parse_dump_stream(io.BytesIO(raw.encode("utf-8")))))
    print(f"parsed {len(entities)} entities")
    first = entities[0]
    print(f"  e.g. {first.id}: labels={dict(list(first.labels.items())[:2])}, "
          f"claims={sorted(first.claims)}")

    cfg = SelectionConfig(
        regions=[RegionSpec(name, frozenset(a)) for name, a in REGIONS.items()],
        properties=PROPERTIES,
        languages=LANGUAGES,
    )
    picked = list(select_cultural_entities(entities, cfg))
    print(f"\n{len(picked)} entities carry an anchor claim:")
    for s in picked:
        print(f"  {s.id:<7} region={s.assigned_region:<8} "
              f"eligible={list(s.eligible_properties)}")

    medians = country_property_median(picked)
    print(f"\nper-region property cap (lower median): {medians}")
    for s in cap_entity_properties(picked, medians):
        print(f"  {s.id:<7} after cap: {list(s.eligible_properties)}")


if __name__ == "__main__":
    main()
