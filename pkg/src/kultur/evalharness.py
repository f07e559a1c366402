"""Entity-recognition scoring at four tolerance levels.

Levels, from strict to lenient: exact name match, exact-or-alias match,
exact-or-target-contained-in-prediction, and the union of all methods.
Containment is checked one way only: the gold name inside the prediction.
The reverse (prediction inside the gold name) would credit bare fragments
like "Taj" and is deliberately not a match.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ._text import normalize as normalize_text

logger = logging.getLogger(__name__)

LEVEL_EXACT = "exact"
LEVEL_ALIAS = "exact_alias"
LEVEL_TARGET_IN_PRED = "exact_target_in_pred"
LEVEL_ALL = "all_methods"

MATCH_LEVELS = (LEVEL_EXACT, LEVEL_ALIAS, LEVEL_TARGET_IN_PRED, LEVEL_ALL)


@dataclass(frozen=True)
class GoldItem:
    id: str
    language: str
    target: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("gold item id must be non-empty")
        if not self.target.strip():
            raise ValueError(f"gold item {self.id}: target must be non-empty")
        if not self.language:
            raise ValueError(f"gold item {self.id}: language must be non-empty")


@dataclass(frozen=True)
class Prediction:
    id: str
    text: str


@dataclass
class ScoreReport:
    n: int
    per_level: dict[str, float] = field(default_factory=dict)
    per_language: dict[str, dict[str, float]] = field(default_factory=dict)
    n_per_language: dict[str, int] = field(default_factory=dict)


def match_at(level: str, pred: Prediction, gold: GoldItem) -> bool:
    """Does the prediction count as correct at the given tolerance level?"""
    if level not in MATCH_LEVELS:
        raise ValueError(f"unknown match level {level!r}")
    p = normalize_text(pred.text)
    t = normalize_text(gold.target)
    exact = p == t
    if level == LEVEL_EXACT:
        return exact
    if level == LEVEL_ALIAS:
        return exact or any(p == normalize_text(a) for a in gold.aliases if a.strip())
    if level == LEVEL_TARGET_IN_PRED:
        return exact or (bool(p) and t in p)
    return (
        exact
        or any(p == normalize_text(a) for a in gold.aliases if a.strip())
        or (bool(p) and t in p)
    )


def score_predictions(
    preds: Sequence[Prediction],
    golds: Sequence[GoldItem],
) -> ScoreReport:
    """Accuracy per level, overall and per language.

    Gold items without a prediction count as misses at every level, so a
    partial run still produces a comparable score. Duplicate prediction ids
    and predictions for unknown ids are caller errors.
    """
    gold_ids = {g.id for g in golds}
    by_id: dict[str, Prediction] = {}
    for p in preds:
        if p.id in by_id:
            raise ValueError(f"duplicate prediction id {p.id!r}")
        if p.id not in gold_ids:
            raise ValueError(f"prediction id {p.id!r} matches no gold item")
        by_id[p.id] = p

    hits = {level: 0 for level in MATCH_LEVELS}
    lang_hits: dict[str, dict[str, int]] = {}
    lang_n: dict[str, int] = {}
    for g in golds:
        lang_n[g.language] = lang_n.get(g.language, 0) + 1
        row = lang_hits.setdefault(g.language, {level: 0 for level in MATCH_LEVELS})
        pred = by_id.get(g.id)
        if pred is None:
            continue
        for level in MATCH_LEVELS:
            if match_at(level, pred, g):
                hits[level] += 1
                row[level] += 1

    n = len(golds)
    report = ScoreReport(n=n, n_per_language=dict(sorted(lang_n.items())))
    report.per_level = {
        level: (hits[level] / n if n else 0.0) for level in MATCH_LEVELS
    }
    report.per_language = {
        lang: {level: row[level] / lang_n[lang] for level in MATCH_LEVELS}
        for lang, row in sorted(lang_hits.items())
    }
    return report


def read_gold_items(path) -> list[GoldItem]:
    """Gold file: one JSON object per line with id, language, target, aliases."""
    items: list[GoldItem] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                items.append(GoldItem(
                    id=obj["id"],
                    language=obj["language"],
                    target=obj["target"],
                    aliases=tuple(obj.get("aliases", ())),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: unreadable gold item: {exc}") from exc
    return items


def read_predictions(path) -> list[Prediction]:
    """Prediction file: one JSON object per line with id and text."""
    preds: list[Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                preds.append(Prediction(id=obj["id"], text=obj.get("text", "")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: unreadable prediction: {exc}") from exc
    return preds


def render_score_table(reports: Mapping[str, ScoreReport]) -> str:
    """One block per level; rows are systems, columns are languages.

    Accuracies print as percentages with one decimal, the formatting the
    surrounding tables use everywhere else.
    """
    languages: list[str] = sorted({
        lang for report in reports.values() for lang in report.n_per_language
    })
    name_w = max([len("System")] + [len(name) for name in reports])
    lines: list[str] = []
    for level in MATCH_LEVELS:
        lines.append(f"[{level}]")
        header = f"{'System':<{name_w}}  " + "  ".join(f"{lang:>8}" for lang in languages)
        header += f"  {'all':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for name, report in reports.items():
            cells = []
            for lang in languages:
                acc = report.per_language.get(lang, {}).get(level)
                cells.append(f"{acc * 100:>7.1f}%" if acc is not None else f"{'-':>8}")
            overall = report.per_level.get(level, 0.0)
            lines.append(
                f"{name:<{name_w}}  " + "  ".join(cells) + f"  {overall * 100:>7.1f}%"
            )
        lines.append("")
    return "\n".join(lines)
