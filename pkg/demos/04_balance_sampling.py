"""Rebalance a skewed record pool with temperature sampling.

Raw pools are dominated by a few regions and languages. Raising the
temperature flattens the sampling weights toward uniform, which lifts the
low-resource buckets without discarding the high-resource ones entirely.
Quotas are integers under a fixed budget; records are then drawn per bucket
with a seeded generator so reruns reproduce the same picks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from kultur.sampling import (
    allocate_quotas,
    dedup_records,
    hybrid_sample,
    render_plan,
    temperature_weights,
)


@dataclass
class Rec:
    region: str
    language: str
    entity_id: str
    kind: str = "property"
    property: str | None = "P17"
    image: str | None = None
    question: str = "Which country?"


def main() -> None:
    counts = {"India": 1600, "Germany": 400, "Peru": 25, "Fiji": 4}
    print(f"raw pool sizes: {counts}")
    for t in (1.0, 1.5, 4.0, 100.0):
        w = temperature_weights(counts, t)
        shown = ", ".join(f"{k}={v:.3f}" for k, v in w.items())
        print(f"  t={t:<6g} weights: {shown}")

    quotas = allocate_quotas(temperature_weights(counts, 4.0), 40, counts)
    print(f"\nbudget 40 at t=4 allocates: {quotas} (sum={sum(quotas.values())})")

    rng = random.Random(11)
    pool = []
    for region, langs in {
        "India": {"hi": 30, "en": 120},
        "Germany": {"de": 25, "en": 60},
        "Peru": {"es": 8},
    }.items():
        for lang, n in langs.items():
            for i in range(n):
                pool.append(Rec(region=region, language=lang,
                                entity_id=f"Q{rng.randint(1, 10_000)}",
                                question=f"Question {region}-{lang}-{i}?"))
    print(f"\nhybrid sample over {len(pool)} records, budget 24:")
    plan, picked = hybrid_sample(pool, t_region=4.0, t_lang=1.5, budget=24, seed=7)
    print(render_plan(plan))
    by_bucket: dict[tuple[str, str], int] = {}
    for r in picked:
        key = (r.region, r.language)
        by_bucket[key] = by_bucket.get(key, 0) + 1
    print(f"picked {len(picked)} records: {by_bucket}")

    dupes = [Rec(region="India", language="en", entity_id="Q1"),
             Rec(region="India", language="en", entity_id="Q1",
                 question="  which COUNTRY? ")]
    kept = list(dedup_records(dupes))
    print(f"\ndedup folds case and whitespace: {len(dupes)} records -> {len(kept)}")


if __name__ == "__main__":
    main()
