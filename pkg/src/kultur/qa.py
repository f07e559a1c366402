"""Template-driven question/answer generation.

Questions ask about the image and never name the entity; answers restate the
entity name together with either a claim value (property scope) or the
entity's own description (identity scope). Claim values are rendered to plain
text with label lookups for referenced entities.
"""

from __future__ import annotations

import json
import logging
import re
import string
from dataclasses import dataclass
from typing import Iterable, Mapping

from .kg import ClaimValue

logger = logging.getLogger(__name__)

SCOPE_PROPERTY = "property"
SCOPE_IDENTITY = "identity"

_MONTHS = [
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
]

_formatter = string.Formatter()


class TemplateError(ValueError):
    """A template failed validation at load time."""


def _fields(template: str) -> set[str]:
    try:
        return {name for _, name, _, _ in _formatter.parse(template) if name}
    except ValueError as exc:
        raise TemplateError(f"unbalanced braces: {exc}") from exc


@dataclass(frozen=True)
class QaTemplate:
    """One question/answer template pair.

    Property-scope answers must mention the claim value; identity-scope
    answers must mention the entity name. Question text takes no placeholders
    at all, which is what keeps the entity name out of every question.
    """

    id: str
    scope: str
    language: str
    question: str
    answer: str
    property: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise TemplateError("template id must be non-empty")
        if self.scope not in (SCOPE_PROPERTY, SCOPE_IDENTITY):
            raise TemplateError(f"{self.id}: unknown scope {self.scope!r}")
        if self.scope == SCOPE_PROPERTY and not self.property:
            raise TemplateError(f"{self.id}: property-scope template without a property")
        if self.scope == SCOPE_IDENTITY and self.property:
            raise TemplateError(f"{self.id}: identity-scope template must not bind a property")
        if not self.language:
            raise TemplateError(f"{self.id}: language must be non-empty")
        if not self.question.strip() or not self.answer.strip():
            raise TemplateError(f"{self.id}: question and answer must be non-empty")
        if _fields(self.question):
            raise TemplateError(f"{self.id}: question templates must not take placeholders")
        answer_fields = _fields(self.answer)
        if self.scope == SCOPE_PROPERTY:
            allowed, required = {"entity_name", "property_value"}, "property_value"
        else:
            allowed, required = {"entity_name", "entity_description"}, "entity_name"
        unknown = answer_fields - allowed
        if unknown:
            raise TemplateError(f"{self.id}: unknown answer placeholders {sorted(unknown)}")
        if required not in answer_fields:
            raise TemplateError(f"{self.id}: answer must use {{{required}}}")


class TemplateStore:
    """Template collection with scope/property/language lookup."""

    def __init__(self, templates: Iterable[QaTemplate] = ()) -> None:
        self._templates: list[QaTemplate] = []
        self._ids: set[str] = set()
        for t in templates:
            self.add(t)

    def add(self, t: QaTemplate) -> None:
        if t.id in self._ids:
            raise TemplateError(f"duplicate template id {t.id!r}")
        self._ids.add(t.id)
        self._templates.append(t)

    def __len__(self) -> int:
        return len(self._templates)

    def __iter__(self):
        return iter(self._templates)

    def property_templates(self, prop: str, language: str) -> list[QaTemplate]:
        return [
            t for t in self._templates
            if t.scope == SCOPE_PROPERTY and t.property == prop and t.language == language
        ]

    def identity_templates(self, language: str) -> list[QaTemplate]:
        return [
            t for t in self._templates
            if t.scope == SCOPE_IDENTITY and t.language == language
        ]

    def languages(self) -> list[str]:
        return sorted({t.language for t in self._templates})

    @classmethod
    def load(cls, path) -> "TemplateStore":
        """Read templates from a JSONL file, one object per line."""
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise TemplateError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
                try:
                    store.add(QaTemplate(
                        id=obj["id"],
                        scope=obj["scope"],
                        language=obj["language"],
                        question=obj["question"],
                        answer=obj["answer"],
                        property=obj.get("property"),
                    ))
                except KeyError as exc:
                    raise TemplateError(f"{path}:{line_no}: missing field {exc}") from exc
                except TemplateError as exc:
                    raise TemplateError(f"{path}:{line_no}: {exc}") from exc
        return store

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._templates:
                obj = {
                    "id": t.id,
                    "scope": t.scope,
                    "language": t.language,
                    "question": t.question,
                    "answer": t.answer,
                }
                if t.property:
                    obj["property"] = t.property
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


LabelTable = Mapping[str, Mapping[str, str]]


def pick_label(labels: Mapping[str, str] | None, language: str) -> str | None:
    """Label in the requested language, falling back to English, then to the
    lexicographically first language so the choice is reproducible."""
    if not labels:
        return None
    if language in labels:
        return labels[language]
    if "en" in labels:
        return labels["en"]
    return labels[min(labels)]


def render_time(stamp: str, precision: int | None) -> str | None:
    """Render a dump timestamp at year, month or day precision."""
    m = re.match(r"^([+-])(\d+)-(\d\d)-(\d\d)T", stamp)
    if not m:
        return None
    sign, year_s, month_s, day_s = m.groups()
    year = int(year_s)
    era = " BCE" if sign == "-" and year > 0 else ""
    if precision is None or precision <= 9:
        return f"{year}{era}"
    month = int(month_s)
    if not 1 <= month <= 12:
        return f"{year}{era}"
    if precision == 10:
        return f"{_MONTHS[month - 1]} {year}{era}"
    day = int(day_s)
    if not 1 <= day <= 31:
        return f"{_MONTHS[month - 1]} {year}{era}"
    return f"{day} {_MONTHS[month - 1]} {year}{era}"


def render_quantity(amount: str, unit_label: str | None) -> str:
    text = amount.lstrip("+")
    if unit_label:
        return f"{text} {unit_label}"
    return text


def render_value(value: ClaimValue, labels: LabelTable, language: str) -> str | None:
    """Plain-text rendering of a claim value, or None when unusable.

    Entity references need a label (requested language, then English, then
    any); a reference with no label at all cannot anchor an answer.
    """
    if value.kind == "entity-ref":
        return pick_label(labels.get(value.value), language)
    if value.kind == "text":
        return value.value if value.value.strip() else None
    if value.kind == "quantity":
        unit_label = pick_label(labels.get(value.unit), language) if value.unit else None
        return render_quantity(value.value, unit_label)
    if value.kind == "time":
        return render_time(value.value, value.precision)
    if value.kind == "coordinate":
        return f"{value.lat:g}, {value.lon:g}"
    return None


@dataclass(frozen=True)
class TemplatedQa:
    """A fully instantiated question/answer pair."""

    question: str
    answer: str
    template_id: str
    scope: str
    language: str
    property: str | None = None


def instantiate_property_qa(
    template: QaTemplate,
    entity_name: str,
    value_text: str,
) -> TemplatedQa:
    if template.scope != SCOPE_PROPERTY:
        raise ValueError(f"{template.id} is not a property-scope template")
    answer = template.answer.format_map(
        {"entity_name": entity_name, "property_value": value_text}
    )
    return TemplatedQa(
        question=template.question,
        answer=answer,
        template_id=template.id,
        scope=template.scope,
        language=template.language,
        property=template.property,
    )


_EMPTY_SLOT_COMMA = re.compile(r"\s*,\s*(?=[.!?;:]|$)")
_SPACE_RUN = re.compile(r" {2,}")


def instantiate_entity_qa(
    template: QaTemplate,
    entity_name: str,
    entity_description: str | None,
) -> TemplatedQa:
    """Identity-scope instantiation.

    A missing description degrades the answer to its name-only form: the
    empty slot is dropped along with the comma that introduced it.
    """
    if template.scope != SCOPE_IDENTITY:
        raise ValueError(f"{template.id} is not an identity-scope template")
    desc = (entity_description or "").strip()
    answer = template.answer.format_map(
        {"entity_name": entity_name, "entity_description": desc}
    )
    if not desc:
        answer = _EMPTY_SLOT_COMMA.sub("", answer)
        answer = _SPACE_RUN.sub(" ", answer).strip()
    return TemplatedQa(
        question=template.question,
        answer=answer,
        template_id=template.id,
        scope=template.scope,
        language=template.language,
    )


@dataclass(frozen=True)
class VqaTriplet:
    """An image paired with an instantiated question/answer."""

    entity_id: str
    image_title: str
    qa: TemplatedQa


def pair_images_with_qa(
    entity_id: str,
    image_titles: Iterable[str],
    qas: Iterable[TemplatedQa],
) -> list[VqaTriplet]:
    """Full cross product of an entity's images with its QA pairs.

    Order is images-major: all pairs for the first image, then the second,
    and so on, matching manifest order.
    """
    qa_list = list(qas)
    return [
        VqaTriplet(entity_id=entity_id, image_title=title, qa=qa)
        for title in image_titles
        for qa in qa_list
    ]
