"""Prompt protocols for model-mediated refinement, generation and filtering.

Five fixed protocols, each a system text plus a user template with named
placeholders. The templates are frozen verbatim, quirks included, because
downstream response parsing and any recorded model exchanges depend on the
exact bytes. Substitution is strict: a missing context field is an error and
braces are never emitted literally.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Mapping

KIND_REFINE = "refine"
KIND_MCQ = "mcq"
KIND_TRUEFALSE = "truefalse"
KIND_VQA_FILTER = "vqa-filter"
KIND_MCQ_FILTER = "mcq-filter"

PROMPT_KINDS = (KIND_REFINE, KIND_MCQ, KIND_TRUEFALSE, KIND_VQA_FILTER, KIND_MCQ_FILTER)


class MissingFieldError(KeyError):
    """A template placeholder had no value in the supplied context."""

    def __init__(self, kind: str, field: str) -> None:
        super().__init__(field)
        self.kind = kind
        self.field = field

    def __str__(self) -> str:
        return f"prompt kind {self.kind!r} requires field {self.field!r}"


@dataclass(frozen=True)
class PromptRequest:
    """A rendered exchange ready for dispatch.

    ``image`` is a file title for clients that can attach the picture; the
    refine and generation kinds run text-only in this pipeline, the filter
    kinds may carry one. ``meta`` is free-form routing context (entity id,
    language, record id) that never enters the prompt text.
    """

    kind: str
    system: str
    user: str
    image: str | None = None
    meta: Mapping[str, str] = field(default_factory=dict)


_REFINE_SYSTEM = (
    "You are a cultural expert specializing in creating high-quality, culturally "
    "sensitive questions and answers about diverse entities from around the world. "
    "Your goal is to create natural-sounding questions and factually accurate answers "
    "that respect cultural nuances while maintaining value about important properties "
    "of entities such as location, category, administrative territory, and other key "
    "attributes."
)

_REFINE_USER = """\
Given this entity and context in {language_name}:
Entity: {label}
Description: {description}
Entity Region(Country): {region}
Original Question: {question}
Original Answer: {answer}

Task: Create both a natural question and an answer for a visual question answering dataset focused on cultural recognition of entities in multilingual contexts.

For the question:
1. Maintain the precise property being asked about in the original question (like location, category, administrative territory, awards, etc.)
2. Use natural, conversational phrasing in authentic {language_name} that a native speaker would use
3. Do NOT reveal specific details about the entity in the question unless absolutely necessary
4. Ensure cultural sensitivity and respect for local naming conventions and terminology
5. Make the question grammatically correct, clear, and unambiguous
6. Phrase it as if someone is looking at an image of this entity and asking about it
7. Avoid awkward phrasing or other template artifacts

For the answer:
1. Ensure complete factual accuracy based on the provided information
2. Use natural language appropriate for {language_name} with proper cultural context
3. Include key factual details from the original answer and leave out any unnecessary information
4. When appropriate, provide brief additional cultural context or significance of the entity
5. Make sure to include the full entity name and keep the answer around the property being asked about
6. Avoid vague phrases - be specific and informative. Ensure the answer is clear, concise, relevant, don't include unnecessary details.
7. It is best to avoid adding new information unless it is a well-known fact about the entity that enhances understanding.
8. We are grounding the model to cultural knowledge, so it is really important to be accurate and keep answers factually correct.
9. The region/country of the entity {region} is provided to you for context, so please don't confuse the entity with other regions or countries.

Format your response exactly as:
Q: [your reformulated question]
A: [your reformulated answer]"""

_MCQ_SYSTEM = (
    "You are a cultural expert who creates high-quality multiple-choice questions "
    "about entities while preserving cultural context, and authenticity."
)

_MCQ_USER = """\
Given this entity and context in {language_name}:
Entity: {label}
Description: {description}
Original Question: {question}
Original Answer: {answer}
Region/Country: {region}

Task: Create a multiple-choice question with four options (A, B, C, D) based on the cultural entity.

For the multiple-choice question:
1. Maintain the original topic but use natural, engaging phrasing in {language_name}
2. NEVER reveal specific details about the entity in the question unless necessary
3. Respect cultural context and sensitivity
4. Make it grammatically correct, clear, and culturally relevant
5. Vary question formats beyond basic identification
6. Create questions with appropriate difficulty level
7. Aim for questions that test deeper cultural knowledge
8. Keep the entity as the grounding point

For the options:
1. Option A should ALWAYS be the correct answer
2. Create three plausible but incorrect options (B, C, D)
3. All options should be culturally accurate, sensible, and realistic
4. Ensure all options are similar in length and format
5. All incorrect options should be from the same general category
6. Options should represent meaningful distinctions but yet plausible and challenging within the cultural/regional context

For the explanation:
1. Briefly explain why option A is correct
2. Include relevant cultural or historical context
3. Keep explanation concise but informative (1-3 sentences)
4. Keep the entity as the grounding point

Example format will be provided based on language context.

Create a multiple-choice question for this entity in exactly this format:
Q: [your multiple-choice question]
A) [correct answer]
B) [plausible incorrect option]
C) [plausible incorrect option]
D) [plausible incorrect option]
Correct: A
Explanation: [brief explanation with cultural context]"""

_TF_SYSTEM = (
    "You are a cultural expert who creates clear and culturally-sensitive true/false "
    "statements/questions about entities that test understanding while preserving "
    "authenticity."
)

_TF_USER = """\
Given this entity and context in {language_name}:
Entity: {label}
Description: {description}
Original Question: {question}
Original Answer: {answer}
Region/Country: {region}

Task: Create a true/false statement based on the cultural entity.

For the statement/question:
1. Create either a clear statement OR a yes/no question about the entity in {language_name}
2. Mix between statements and questions for variety
3. Make it unambiguous - clearly either true or false
4. Test meaningful cultural knowledge, not trivial details
5. Respect cultural sensitivity
6. Keep the entity as the central focus
7. Vary between true and false answers for diversity

For the explanation:
1. Briefly explain why the statement is true or false
2. Include relevant cultural or historical context
3. Keep it concise (1-2 sentences)

Example format will be provided based on language context.

Create a true/false item for this entity in exactly this format:
Statement: [your true/false statement]
Answer: [True/False]
Explanation: [brief explanation]

OR

Question: [your true/false question]
Answer: [True/False]
Explanation: [brief explanation]"""

_VQA_FILTER_SYSTEM = (
    "You are an expert at evaluating whether images match with cultural entities and "
    "their descriptions. You assess alignment between visual content and textual "
    "information."
)

_VQA_FILTER_USER = """\
Evaluate this VQA sample for quality and alignment.

Entity Information:
Label: {label}
Description: {description}
Region/Country: {region}
Language: {language}
Question: {question}
Answer: {answer}

Your task is to determine:
1. Does the image show or reasonably represent the entity described?
2. Are there any quality issues with this sample?

Common issues to check for:
1. Image completely unrelated to the entity (e.g., entity is about a person, but image is of animal. Or entity is about park but image show city, or entity is about a person but image is of a building)
2. Mixed languages in question or answer
3. Obvious factual errors in the answer that you can confirm and very sure about
4. Question and answer mismatch
5. Corrupted or incomplete answer

If you are not sure about the answer:
1. Treat sample as match and no issue
2. We are mostly concerned with the image being completely irrelevant to the entity and we understand some models may not know some long-tail entities
3. So unless there is a clear mismatch or quality issue in rephrased question/answer, treat it as match

Other considerations:
1. If the question asks about education or birth place or other entity properties, treat it as a match if the image is related to the entity, even if it does not show the specific property
2. If the image is not provided, treat it as match unless the answer is clearly unrelated to the entity or has problematic issues mentioned above
3. I repeat, if you are not sure about your answer and can not confirm it which might happen alot with long-tail entities, treat it as match and no issue

Format your response exactly as (Notice and keep the line breaks):
MATCH: [True/False]
ISSUE: [None/ImageMismatch/MixedLanguage/FactualError/QAMismatch/Unclear]
EXPLANATION: [Brief explanation of your assessment]"""

_MCQ_FILTER_SYSTEM = (
    "You are an expert at evaluating MCQ quality and cultural alignment. You assess "
    "whether questions match with cultural entities and check for quality issues."
)

_MCQ_FILTER_USER = """\
Evaluate this MCQ sample for quality and alignment.

Entity Information:
Label: {label}
Description: {description}
Region/Country: {region}
Language: {language}
Question Type: {question_type}
Question: {question}
Options: {options_text}
Correct Answer: {correct_answer}
Explanation: {explanation}

Your task is to determine:
1. Does the image (if present) reasonably represent the entity described?
2. Is the question culturally relevant to the specified region?
3. Are there any quality issues with this MCQ?

Common issues to check for:
1. Image completely unrelated to the entity or question
2. Question not relevant to the cultural context or region
3. Incorrect answer or poor explanation
4. Mixed languages in question, options, or explanation
5. Poorly formed question or confusing options
6. Factual errors you can confirm

Guidelines:
1. If you are not sure about cultural relevance or correctness, treat it as acceptable
2. Focus on obvious mismatches and clear quality issues
3. For questions without images, focus on cultural relevance and question quality
4. Consider regional context when evaluating cultural appropriateness

Format your response exactly as:
MATCH: [True/False]
CULTURALLY_RELEVANT: [True/False]
ISSUE: [None/ImageMismatch/CulturalMismatch/IncorrectAnswer/MixedLanguage/PoorQuestion/FactualError/Other]
EXPLANATION: [Brief explanation of your assessment]"""

TEMPLATES: dict[str, tuple[str, str]] = {
    KIND_REFINE: (_REFINE_SYSTEM, _REFINE_USER),
    KIND_MCQ: (_MCQ_SYSTEM, _MCQ_USER),
    KIND_TRUEFALSE: (_TF_SYSTEM, _TF_USER),
    KIND_VQA_FILTER: (_VQA_FILTER_SYSTEM, _VQA_FILTER_USER),
    KIND_MCQ_FILTER: (_MCQ_FILTER_SYSTEM, _MCQ_FILTER_USER),
}


def _template_fields(template: str) -> frozenset[str]:
    seen: set[str] = set()
    for _, name, _, _ in string.Formatter().parse(template):
        if name:
            seen.add(name)
    return frozenset(seen)


REQUIRED_FIELDS: dict[str, frozenset[str]] = {
    kind: _template_fields(user) for kind, (_, user) in TEMPLATES.items()
}


def render_prompt(
    kind: str,
    ctx: Mapping[str, str],
    image: str | None = None,
    meta: Mapping[str, str] | None = None,
) -> PromptRequest:
    """Render one protocol's prompt from a context mapping.

    Every placeholder in the kind's template must be present in ``ctx``;
    unused context keys are ignored. Rendering is pure, so equal inputs give
    byte-identical outputs.
    """
    if kind not in TEMPLATES:
        raise ValueError(f"unknown prompt kind {kind!r} (expected one of {PROMPT_KINDS})")
    system, user_template = TEMPLATES[kind]
    for name in REQUIRED_FIELDS[kind]:
        if name not in ctx or ctx[name] is None:
            raise MissingFieldError(kind, name)
    user = user_template.format_map(dict(ctx))
    return PromptRequest(kind=kind, system=system, user=user, image=image, meta=dict(meta or {}))


def options_text(options: list[str]) -> str:
    """Join MCQ options into the ``A) ... | B) ...`` single-line form used
    when a filter prompt restates them."""
    if len(options) != 4:
        raise ValueError(f"expected exactly 4 options, got {len(options)}")
    letters = "ABCD"
    return " | ".join(f"{letters[i]}) {opt}" for i, opt in enumerate(options))
