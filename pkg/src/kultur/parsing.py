"""Parsers for the structured model-response grammars.

Each parser accepts arbitrary text and either returns a value or raises
:class:`MalformedResponse` with a classified reason; no input crashes them.
The parsers are neutral grammars: leniency policy ("when unsure treat as
match") belongs to the prompts, not here. Every result type has a canonical
text renderer, and render followed by parse is an identity.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ._text import normalize
from .kg import Entity

logger = logging.getLogger(__name__)

ISSUE_TOKENS = (
    "None",
    "ImageMismatch",
    "MixedLanguage",
    "FactualError",
    "QAMismatch",
    "Unclear",
    "CulturalMismatch",
    "IncorrectAnswer",
    "PoorQuestion",
    "Other",
)

_ISSUE_BY_KEY = {t.casefold(): t for t in ISSUE_TOKENS}


class MalformedResponse(ValueError):
    """Response text that does not satisfy the expected grammar."""

    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True)
class RefinedQa:
    question: str
    answer: str


@dataclass(frozen=True)
class McqItem:
    question: str
    options: tuple[str, str, str, str]
    correct_index: int
    explanation: str


@dataclass(frozen=True)
class TfItem:
    text: str
    form: str            # "statement" or "question"
    answer: bool
    explanation: str


@dataclass(frozen=True)
class FilterVerdict:
    match: bool
    issue: str
    explanation: str
    culturally_relevant: bool | None = None


def _strip_brackets(s: str) -> str:
    s = s.strip()
    if s.startswith("[") and s.endswith("]"):
        s = s[1:-1].strip()
    return s


_Q_MARK = re.compile(r"^[ \t]*Q:", re.MULTILINE)
_A_MARK = re.compile(r"^[ \t]*A:", re.MULTILINE)


def parse_refine_response(text: str) -> RefinedQa:
    """Parse the ``Q:`` / ``A:`` refinement reply.

    Prose before the first ``Q:`` is tolerated. The question runs to the
    ``A:`` marker, the answer to end of text. A second ``Q:`` marker after
    the answer started means the reply holds more than one exchange, which
    the grammar does not admit.
    """
    q = _Q_MARK.search(text)
    if q is None:
        raise MalformedResponse("missing-q-marker")
    a = _A_MARK.search(text, q.end())
    if a is None:
        raise MalformedResponse("missing-a-marker")
    question = text[q.end():a.start()].strip()
    answer_span = text[a.end():]
    if _Q_MARK.search(answer_span):
        raise MalformedResponse("second-q-marker")
    answer = answer_span.strip()
    if not question:
        raise MalformedResponse("empty-question")
    if not answer:
        raise MalformedResponse("empty-answer")
    return RefinedQa(question=question, answer=answer)


def render_refined(qa: RefinedQa) -> str:
    return f"Q: {qa.question}\nA: {qa.answer}"


_OPTION_MARK = re.compile(r"^[ \t]*([A-D])\)\s?")
_CORRECT_MARK = re.compile(r"^[ \t]*Correct:\s*(.*)$")
_EXPLANATION_MARK = re.compile(r"^[ \t]*Explanation:\s*(.*)$")
_Q_LINE = re.compile(r"^[ \t]*Q:\s*(.*)$")


def parse_mcq_response(text: str) -> McqItem:
    """Parse the four-option MCQ reply.

    The generator contract places the correct answer at option A, so
    ``correct_index`` is always 0 here; any other ``Correct:`` letter is a
    contract violation, not a shuffle.
    """
    question_parts: list[str] = []
    options: dict[str, list[str]] = {}
    correct_letter: str | None = None
    explanation_parts: list[str] | None = None
    section = "preamble"
    current_option: list[str] | None = None

    for line in text.splitlines():
        q_m = _Q_LINE.match(line)
        if q_m and section == "preamble":
            section = "question"
            question_parts.append(q_m.group(1))
            continue
        opt_m = _OPTION_MARK.match(line)
        if opt_m and section in ("question", "options"):
            letter = opt_m.group(1)
            if letter in options:
                raise MalformedResponse("duplicate-options", f"option {letter} repeated")
            section = "options"
            current_option = [line[opt_m.end():].rstrip()]
            options[letter] = current_option
            continue
        cor_m = _CORRECT_MARK.match(line)
        if cor_m and section in ("question", "options") and correct_letter is None:
            section = "correct"
            correct_letter = _strip_brackets(cor_m.group(1)).rstrip(".").strip().upper()
            continue
        exp_m = _EXPLANATION_MARK.match(line)
        if exp_m and explanation_parts is None and section in ("correct", "options"):
            section = "explanation"
            explanation_parts = [exp_m.group(1)]
            continue
        if section == "question":
            question_parts.append(line)
        elif section == "options" and current_option is not None:
            current_option.append(line)
        elif section == "explanation" and explanation_parts is not None:
            explanation_parts.append(line)

    question = "\n".join(question_parts).strip()
    if not question:
        raise MalformedResponse("missing-section", "no Q: line")
    missing = [letter for letter in "ABCD" if letter not in options]
    if missing:
        raise MalformedResponse("missing-section", f"options {missing} absent")
    texts = ["\n".join(parts).strip() for letter, parts in sorted(options.items())]
    if any(not t for t in texts):
        raise MalformedResponse("missing-section", "empty option text")
    if correct_letter is None:
        raise MalformedResponse("missing-section", "no Correct: line")
    if correct_letter != "A":
        raise MalformedResponse("wrong-correct-letter", f"Correct: {correct_letter}")
    if explanation_parts is None:
        raise MalformedResponse("missing-section", "no Explanation: line")
    explanation = "\n".join(explanation_parts).strip()
    if len({normalize(t) for t in texts}) != 4:
        raise MalformedResponse("duplicate-options")
    return McqItem(
        question=question,
        options=(texts[0], texts[1], texts[2], texts[3]),
        correct_index=0,
        explanation=explanation,
    )


def render_mcq(item: McqItem) -> str:
    """Canonical MCQ text; only meaningful for the parse-time layout where
    option A is correct."""
    letters = "ABCD"
    lines = [f"Q: {item.question}"]
    lines.extend(f"{letters[i]}) {opt}" for i, opt in enumerate(item.options))
    lines.append(f"Correct: {letters[item.correct_index]}")
    lines.append(f"Explanation: {item.explanation}")
    return "\n".join(lines)


_TF_LEAD = re.compile(r"^[ \t]*(Statement|Question):\s*(.*)$", re.MULTILINE)
_ANSWER_MARK = re.compile(r"^[ \t]*Answer:\s*(.*)$", re.MULTILINE)


def parse_tf_response(text: str) -> TfItem:
    """Parse the true/false reply in either its statement or question form."""
    lead = _TF_LEAD.search(text)
    if lead is None:
        raise MalformedResponse("missing-section", "no Statement: or Question: line")
    form = lead.group(1).lower()
    ans = _ANSWER_MARK.search(text, lead.end())
    if ans is None:
        raise MalformedResponse("missing-section", "no Answer: line")
    tf_text = (lead.group(2) + text[lead.end():ans.start()]).strip()
    if not tf_text:
        raise MalformedResponse("missing-section", "empty statement text")
    token = _strip_brackets(ans.group(1)).rstrip(".").strip().casefold()
    if token == "true":
        answer = True
    elif token == "false":
        answer = False
    else:
        raise MalformedResponse("bad-answer-token", ans.group(1).strip())
    exp_m = re.compile(r"^[ \t]*Explanation:\s*", re.MULTILINE).search(text, ans.end())
    if exp_m is None:
        raise MalformedResponse("missing-section", "no Explanation: line")
    explanation = text[exp_m.end():].strip()
    return TfItem(text=tf_text, form=form, answer=answer, explanation=explanation)


def render_tf(item: TfItem) -> str:
    lead = "Statement" if item.form == "statement" else "Question"
    token = "True" if item.answer else "False"
    return f"{lead}: {item.text}\nAnswer: {token}\nExplanation: {item.explanation}"


_MATCH_MARK = re.compile(r"^[ \t]*MATCH:\s*(.*)$", re.MULTILINE)
_CULT_MARK = re.compile(r"^[ \t]*CULTURALLY_RELEVANT:\s*(.*)$", re.MULTILINE)
_ISSUE_MARK = re.compile(r"^[ \t]*ISSUE:\s*(.*)$", re.MULTILINE)
_EXPL_MARK = re.compile(r"^[ \t]*EXPLANATION:\s*", re.MULTILINE)


def _parse_bool_token(raw: str, where: str) -> bool:
    token = _strip_brackets(raw).rstrip(".").strip().casefold()
    if token == "true":
        return True
    if token == "false":
        return False
    raise MalformedResponse("bad-bool-token", f"{where}: {raw.strip()!r}")


def parse_filter_verdict(text: str, kind: str) -> FilterVerdict:
    """Parse a judge verdict for either filter flavor.

    Both flavors share one issue vocabulary; a token outside it degrades to
    ``Other`` with a logged diagnostic rather than failing the record. A
    missing MATCH line is malformed, as is the self-contradictory vqa-filter
    combination of no issue and no match.
    """
    if kind not in ("vqa-filter", "mcq-filter"):
        raise ValueError(f"unknown filter kind {kind!r}")
    m = _MATCH_MARK.search(text)
    if m is None:
        raise MalformedResponse("missing-match")
    match = _parse_bool_token(m.group(1), "MATCH")

    culturally_relevant: bool | None = None
    if kind == "mcq-filter":
        c = _CULT_MARK.search(text)
        if c is not None:
            culturally_relevant = _parse_bool_token(c.group(1), "CULTURALLY_RELEVANT")

    issue = "None"
    i = _ISSUE_MARK.search(text)
    if i is not None:
        raw = _strip_brackets(i.group(1)).rstrip(".").strip()
        issue = _ISSUE_BY_KEY.get(raw.casefold(), "")
        if not issue:
            logger.warning("unknown issue token %r mapped to Other", raw)
            issue = "Other"

    explanation = ""
    e = _EXPL_MARK.search(text)
    if e is not None:
        explanation = text[e.end():].strip()

    if kind == "vqa-filter" and issue == "None" and not match:
        raise MalformedResponse("inconsistent-verdict", "MATCH False with ISSUE None")
    return FilterVerdict(
        match=match,
        issue=issue,
        explanation=explanation,
        culturally_relevant=culturally_relevant,
    )


def render_verdict(v: FilterVerdict) -> str:
    token = "True" if v.match else "False"
    lines = [f"MATCH: {token}"]
    if v.culturally_relevant is not None:
        lines.append(f"CULTURALLY_RELEVANT: {'True' if v.culturally_relevant else 'False'}")
    lines.append(f"ISSUE: {v.issue}")
    lines.append(f"EXPLANATION: {v.explanation}")
    return "\n".join(lines)


def leakage_check(question: str, e: Entity, lang: str) -> bool:
    """True when the question leaks the entity's name.

    The scan covers the label and every alias in the record's language and in
    English, compared as normalized substrings.
    """
    haystack = normalize(question)
    if not haystack:
        return False
    needles: list[str] = []
    for code in dict.fromkeys((lang, "en")):
        label = e.labels.get(code)
        if label:
            needles.append(label)
        needles.extend(e.aliases.get(code, ()))
    for needle in needles:
        n = normalize(needle)
        if n and n in haystack:
            return True
    return False
