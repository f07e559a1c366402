"""Render the five frozen prompt protocols and parse model responses.

The prompt text is pinned: equal context always renders byte-identical
requests, and the request hash keys the record/replay store. Responses come
back as constrained plain text; the parsers accept exactly the documented
grammar and classify every deviation instead of crashing.
"""

from __future__ import annotations

from kultur.gateway import request_hash
from kultur.parsing import (
    MalformedResponse,
    parse_filter_verdict,
    parse_mcq_response,
    parse_refine_response,
)
from kultur.prompts import PROMPT_KINDS, render_prompt

CTX = {
    "language_name": "English",
    "language": "English",
    "label": "Taj Mahal",
    "description": "a 17th-century mausoleum in India",
    "region": "India",
    "question": "Which country is this located in?",
    "answer": "Taj Mahal is located in India.",
    "question_type": "multiple-choice",
    "options_text": "India | Germany | France | Japan",
    "correct_answer": "India",
    "explanation": "The monument stands in Agra.",
}


def main() -> None:
    print(f"prompt kinds: {PROMPT_KINDS}\n")
    req = render_prompt("refine", CTX)
    print("refine request:")
    print(f"  system: {req.system.splitlines()[0]}")
    for line in req.user.splitlines()[:6]:
        print(f"  | {line}")
    print(f"  hash: {request_hash(req)}")
    again = request_hash(render_prompt("refine", dict(CTX)))
    print(f"  re-rendered hash matches: {again == request_hash(req)}")

    print("\nwell-formed refine response parses to a record update:")
    qa = parse_refine_response("Q: In which country does this mausoleum stand?\n"
                               "A: It stands in India.")
    print(f"  {qa}")

    print("\nwell-formed choice response:")
    mcq = parse_mcq_response(
        "Q: Which country is this monument located in?\n"
        "A) India\nB) Germany\nC) France\nD) Japan\n"
        "Correct: A\nExplanation: The monument stands in Agra."
    )
    print(f"  options={mcq.options} correct_index={mcq.correct_index}")

    print("\nthe correct option must be listed first; anything else is rejected:")
    try:
        parse_mcq_response(
            "Q: Which country?\nA) Germany\nB) India\nC) France\nD) Japan\n"
            "Correct: B\nExplanation: listed out of order"
        )
    except MalformedResponse as exc:
        print(f"  MalformedResponse reason={exc.reason!r}")

    print("\nfilter verdicts demand one of the known issue tokens:")
    verdict = parse_filter_verdict(
        "MATCH: True\nISSUE: None\nEXPLANATION: The answer fits the image.",
        "vqa-filter",
    )
    print(f"  {verdict}")
    try:
        parse_filter_verdict("The image looks fine to me!", "vqa-filter")
    except MalformedResponse as exc:
        print(f"  free-form chatter -> MalformedResponse reason={exc.reason!r}")


if __name__ == "__main__":
    main()
