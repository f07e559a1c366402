"""Score model predictions against gold answers at four match levels.

Matching is string-based on normalized text (Unicode NFC, case folded,
whitespace collapsed). The levels nest: exact equality with the target,
then alias equality, then target-contained-in-prediction, then the union.
Containment is one-way on purpose; a prediction that is a fragment of the
target never counts.
"""

from __future__ import annotations

from kultur.evalharness import (
    MATCH_LEVELS,
    GoldItem,
    Prediction,
    match_at,
    render_score_table,
    score_predictions,
)

GOLDS = [
    GoldItem(id="r1", language="en", target="Taj Mahal"),
    GoldItem(id="r2", language="en", target="Narendra Modi", aliases=("Modi",)),
    GoldItem(id="r3", language="hi", target="हम्पी"),
    GoldItem(id="r4", language="en", target="Red Fort"),
]

SYSTEMS = {
    "verbose-model": [
        Prediction(id="r1", text="The famous Taj Mahal monument in Agra"),
        Prediction(id="r2", text="Modi"),
        Prediction(id="r3", text="हम्पी"),
        Prediction(id="r4", text="red fort"),
    ],
    "terse-model": [
        Prediction(id="r1", text="Taj"),
        Prediction(id="r2", text="Narendra Modi"),
        Prediction(id="r3", text="Mysore"),
        Prediction(id="r4", text="Red Fort."),
    ],
}


def main() -> None:
    reports = {name: score_predictions(preds, GOLDS)
               for name, preds in SYSTEMS.items()}
    print(render_score_table(reports))

    print("level by level for one gold item:")
    gold = GOLDS[1]
    for text in ("Narendra Modi", "Modi", "PM Narendra Modi spoke today", "Narendra"):
        hits = [level for level in MATCH_LEVELS
                if match_at(level, Prediction(id="r2", text=text), gold)]
        print(f"  {text!r:<34} matches at: {hits or 'none'}")


if __name__ == "__main__":
    main()
