"""Two-stage temperature sampling and record deduplication.

Region buckets are rebalanced first with a high temperature, then languages
are rebalanced inside each region with a lower one, which caps oversized
buckets without starving small ones while keeping entities' cross-lingual
record groups mostly intact. Weights follow p_i proportional to n_i^(1/T).
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from ._text import normalize

logger = logging.getLogger(__name__)

DEFAULT_T_REGION = 4.0
DEFAULT_T_LANG = 1.5


def temperature_weights(counts: Mapping[str, int], t: float) -> dict[str, float]:
    """Sampling probabilities p_i = n_i^(1/t) normalized over all buckets.

    t=1 reproduces raw proportions; larger t flattens toward uniform over the
    positive-count buckets. Zero-count buckets get probability zero.
    """
    if t <= 0:
        raise ValueError(f"temperature must be positive, got {t}")
    if any(n < 0 for n in counts.values()):
        raise ValueError("counts must be non-negative")
    powered = {k: (n ** (1.0 / t) if n > 0 else 0.0) for k, n in counts.items()}
    total = sum(powered.values())
    if total <= 0:
        raise ValueError("at least one bucket must have a positive count")
    return {k: v / total for k, v in powered.items()}


def allocate_quotas(
    weights: Mapping[str, float],
    budget: int,
    available: Mapping[str, int],
) -> dict[str, int]:
    """Integer quotas for each bucket under a total budget.

    Budget shares are apportioned by largest remainder, clamped to each
    bucket's availability, and freed budget is re-apportioned among the
    still-unclamped buckets with renormalized weights until it is spent.
    Ties on fractional remainder break toward the lexicographically smaller
    key. With weights derived from the availability counts, the quotas sum
    to min(budget, total availability) exactly.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    quotas = {k: 0 for k in weights}
    capacity = {k: max(0, int(available.get(k, 0))) for k in weights}
    active = {k for k, w in weights.items() if w > 0 and capacity[k] > 0}
    remaining = budget
    while remaining > 0 and active:
        weight_sum = sum(weights[k] for k in active)
        if weight_sum <= 0:
            break
        shares = {k: remaining * weights[k] / weight_sum for k in active}
        floors = {k: int(shares[k]) for k in active}
        leftover = remaining - sum(floors.values())
        # Hand out the leftover units to the largest fractional remainders.
        order = sorted(active, key=lambda k: (-(shares[k] - floors[k]), k))
        for k in order[:leftover]:
            floors[k] += 1
        freed = 0
        for k in sorted(active):
            take = min(floors[k], capacity[k])
            quotas[k] += take
            capacity[k] -= take
            freed += floors[k] - take
            if capacity[k] == 0:
                active.discard(k)
        if freed == remaining:
            break
        remaining = freed
    return quotas


@dataclass
class SamplingPlan:
    """Quotas and availability for one sampling run."""

    t_region: float
    t_lang: float
    seed: int
    budget: int
    region_available: dict[str, int] = field(default_factory=dict)
    region_quota: dict[str, int] = field(default_factory=dict)
    language_available: dict[tuple[str, str], int] = field(default_factory=dict)
    language_quota: dict[tuple[str, str], int] = field(default_factory=dict)


def hybrid_sample(
    records: Iterable,
    t_region: float = DEFAULT_T_REGION,
    t_lang: float = DEFAULT_T_LANG,
    budget: int = 0,
    seed: int = 0,
) -> tuple[SamplingPlan, list]:
    """Balance records across regions, then across languages within regions.

    Records need ``region`` and ``language`` attributes. Within each
    (region, language) bucket the quota is drawn uniformly without
    replacement by a generator seeded from (seed, region, language), and the
    drawn records keep their input order. Output iterates regions and
    languages in sorted order, so equal inputs give identical output bytes.
    """
    buckets: dict[tuple[str, str], list] = {}
    region_counts: dict[str, int] = {}
    for r in records:
        key = (r.region, r.language)
        buckets.setdefault(key, []).append(r)
        region_counts[r.region] = region_counts.get(r.region, 0) + 1

    plan = SamplingPlan(
        t_region=t_region,
        t_lang=t_lang,
        seed=seed,
        budget=budget,
        region_available=dict(sorted(region_counts.items())),
    )
    if not buckets or budget <= 0:
        plan.region_quota = {k: 0 for k in region_counts}
        return plan, []

    region_weights = temperature_weights(region_counts, t_region)
    plan.region_quota = allocate_quotas(region_weights, budget, region_counts)

    chosen: list = []
    for region in sorted(region_counts):
        lang_counts = {
            lang: len(bucket)
            for (reg, lang), bucket in buckets.items()
            if reg == region
        }
        for lang in sorted(lang_counts):
            plan.language_available[(region, lang)] = lang_counts[lang]
        region_budget = plan.region_quota.get(region, 0)
        if region_budget <= 0:
            for lang in sorted(lang_counts):
                plan.language_quota[(region, lang)] = 0
            continue
        lang_weights = temperature_weights(lang_counts, t_lang)
        lang_quota = allocate_quotas(lang_weights, region_budget, lang_counts)
        for lang in sorted(lang_counts):
            quota = lang_quota.get(lang, 0)
            plan.language_quota[(region, lang)] = quota
            bucket = buckets[(region, lang)]
            if quota >= len(bucket):
                chosen.extend(bucket)
                continue
            rng = random.Random(f"{seed}|{region}|{lang}")
            picks = sorted(rng.sample(range(len(bucket)), quota))
            chosen.extend(bucket[i] for i in picks)
    return plan, chosen


def question_fingerprint(question: str) -> str:
    return hashlib.sha256(normalize(question).encode("utf-8")).hexdigest()


def dedup_key(record) -> tuple:
    """Identity key for near-duplicate suppression.

    Two records collide when they concern the same entity, kind, property,
    language and image and normalize to the same question text.
    """
    return (
        record.entity_id,
        record.kind,
        record.property or "",
        record.language,
        record.image or "",
        question_fingerprint(record.question),
    )


def dedup_records(records: Iterable) -> Iterator:
    """Drop later records whose dedup key was already seen; first one wins."""
    seen: set[tuple] = set()
    for r in records:
        key = dedup_key(r)
        if key in seen:
            continue
        seen.add(key)
        yield r


def render_plan(plan: SamplingPlan) -> str:
    """Human-readable plan report: availability and quota per bucket."""
    lines = [
        f"budget={plan.budget} seed={plan.seed} "
        f"t_region={plan.t_region:g} t_lang={plan.t_lang:g}",
        "",
        f"{'REGION':<24} {'AVAILABLE':>10} {'QUOTA':>8}",
    ]
    for region in sorted(plan.region_available):
        lines.append(
            f"{region:<24} {plan.region_available[region]:>10} "
            f"{plan.region_quota.get(region, 0):>8}"
        )
    total_avail = sum(plan.region_available.values())
    total_quota = sum(plan.region_quota.values())
    lines.append(f"{'TOTAL':<24} {total_avail:>10} {total_quota:>8}")
    lines.append("")
    lines.append(f"{'REGION':<24} {'LANGUAGE':<10} {'AVAILABLE':>10} {'QUOTA':>8}")
    for (region, lang) in sorted(plan.language_available):
        lines.append(
            f"{region:<24} {lang:<10} {plan.language_available[(region, lang)]:>10} "
            f"{plan.language_quota.get((region, lang), 0):>8}"
        )
    return "\n".join(lines) + "\n"
