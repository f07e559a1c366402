"""Prompt protocol rendering: field strictness and frozen template bytes."""

from __future__ import annotations

import hashlib

import pytest

from kultur.prompts import (
    KIND_MCQ,
    KIND_MCQ_FILTER,
    KIND_REFINE,
    KIND_TRUEFALSE,
    KIND_VQA_FILTER,
    MissingFieldError,
    PROMPT_KINDS,
    REQUIRED_FIELDS,
    TEMPLATES,
    options_text,
    render_prompt,
)

# The protocol texts are contracts: identical bytes mean identical request
# hashes and replayable stores across machines and versions. Any edit must be
# deliberate, so each (system, user) pair is pinned by digest.
TEMPLATE_PINS = {
    "refine": "e59271f0f89eea2bddc8f6163dbb3597ceb782c3ccb8893c343ebc3684277f1d",
    "mcq": "9adaa8a67ffc31930cb71aa472274f3cceec3326ef070c8fead93b05db88d228",
    "truefalse": "05c26b25610e4a66cbe88147f769b48f44c73e7e089e8a59b2dde0c620a9adc7",
    "vqa-filter": "494f7e5adc3d1101f1dc29551e9a1f5b5584866fcdaaacac6bbc153a4618bbe0",
    "mcq-filter": "28620e954f8d5c790b6e9afad805ef3248f92a847f4ca4abd7c5343a0fd2aba6",
}

REFINE_CTX = {
    "language_name": "English",
    "label": "Taj Mahal",
    "description": "a 17th-century mausoleum in India",
    "region": "India",
    "question": "What is the entity shown in the image?",
    "answer": "The Taj Mahal, a 17th-century mausoleum in India.",
}


def test_kind_constants_cover_all_templates():
    assert set(PROMPT_KINDS) == {
        KIND_REFINE, KIND_MCQ, KIND_TRUEFALSE, KIND_VQA_FILTER, KIND_MCQ_FILTER,
    }
    assert set(TEMPLATES) == set(PROMPT_KINDS) == set(REQUIRED_FIELDS)


def test_template_bytes_are_pinned():
    for kind in PROMPT_KINDS:
        system, user = TEMPLATES[kind]
        digest = hashlib.sha256((system + "\x00" + user).encode("utf-8")).hexdigest()
        assert digest == TEMPLATE_PINS[kind], f"{kind} template text changed"


def test_required_fields_per_kind():
    shared = {"label", "description", "region", "question", "answer"}
    assert REQUIRED_FIELDS["refine"] == shared | {"language_name"}
    assert REQUIRED_FIELDS["mcq"] == shared | {"language_name"}
    assert REQUIRED_FIELDS["truefalse"] == shared | {"language_name"}
    assert REQUIRED_FIELDS["vqa-filter"] == shared | {"language"}
    assert REQUIRED_FIELDS["mcq-filter"] == {
        "label", "description", "region", "language", "question",
        "question_type", "options_text", "correct_answer", "explanation",
    }


def test_render_substitutes_every_placeholder():
    req = render_prompt("refine", REFINE_CTX)
    assert req.kind == "refine"
    assert "Entity: Taj Mahal" in req.user
    assert "Entity Region(Country): India" in req.user
    assert "Original Question: What is the entity shown in the image?" in req.user
    assert "{" not in req.user and "}" not in req.user
    assert req.image is None


def test_missing_field_is_an_error():
    ctx = dict(REFINE_CTX)
    del ctx["region"]
    with pytest.raises(MissingFieldError) as err:
        render_prompt("refine", ctx)
    assert "refine" in str(err.value) and "region" in str(err.value)


def test_none_field_is_an_error():
    ctx = dict(REFINE_CTX, description=None)
    with pytest.raises(MissingFieldError):
        render_prompt("refine", ctx)


def test_extra_fields_are_ignored():
    req = render_prompt("refine", dict(REFINE_CTX, extra="unused"))
    assert "unused" not in req.user


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        render_prompt("summarize", REFINE_CTX)


def test_image_and_meta_ride_along():
    req = render_prompt(
        "vqa-filter",
        {
            "label": "X", "description": "d", "region": "R",
            "language": "English", "question": "q", "answer": "a",
        },
        image="File:X.jpg",
        meta={"source": "rec-1"},
    )
    assert req.image == "File:X.jpg"
    assert req.meta["source"] == "rec-1"
    with pytest.raises(Exception):
        req.kind = "other"  # requests are frozen


def test_protocol_quirks_are_preserved():
    """Fidelity markers for the filter instructions; they read oddly on
    purpose and must survive reformatting."""
    vqa_user = TEMPLATES["vqa-filter"][1]
    assert "which might happen alot with long-tail entities" in vqa_user
    assert "can not confirm" in vqa_user
    assert "ISSUE: [None/ImageMismatch/MixedLanguage/FactualError/QAMismatch/Unclear]" in vqa_user
    mcq_user = TEMPLATES["mcq"][1]
    assert "Option A should ALWAYS be the correct answer" in mcq_user
    refine_user = TEMPLATES["refine"][1]
    assert "Avoid vague phrases - be specific" in refine_user
    mcqf_user = TEMPLATES["mcq-filter"][1]
    assert (
        "ISSUE: [None/ImageMismatch/CulturalMismatch/IncorrectAnswer/MixedLanguage/"
        "PoorQuestion/FactualError/Other]" in mcqf_user
    )


def test_options_text_join():
    assert options_text(["w", "x", "y", "z"]) == "A) w | B) x | C) y | D) z"
    with pytest.raises(ValueError):
        options_text(["only", "three", "items"])
