"""Turn claim values into question/answer pairs through templates.

Shows the two template scopes: property templates fill in a rendered claim
value ("Where was this person born?"), identity templates describe the
entity itself ("What is the entity shown in the image?"). Each QA pair is
then crossed with the entity's images to form visual QA triplets.
"""

from __future__ import annotations

from kultur.kg import ClaimValue
from kultur.qa import (
    QaTemplate,
    TemplateStore,
    instantiate_entity_qa,
    instantiate_property_qa,
    pair_images_with_qa,
    pick_label,
    render_value,
)

TEMPLATES = TemplateStore([
    QaTemplate(id="birthplace-en", scope="property", property="P19", language="en",
               question="Where was this person born?",
               answer="{entity_name} was born in {property_value}."),
    QaTemplate(id="identity-en", scope="identity", language="en",
               question="What is the entity shown in the image?",
               answer="The {entity_name}, {entity_description}."),
])


def main() -> None:
    # A birthplace claim holds an entity reference; rendering it resolves the
    # target's label in the record language, falling back to English.
    birthplace = ClaimValue(kind="entity-ref", value="Q3012")
    labels = {"Q3012": {"en": "Ulm, Germany", "fr": "Ulm, Allemagne"}}
    value_text = render_value(birthplace, labels, "en")
    print(f"claim value {birthplace.value} renders as {value_text!r}")

    template = TEMPLATES.property_templates("P19", "en")[0]
    qa = instantiate_property_qa(template, "Albert Einstein", value_text)
    print(f"\nproperty template {template.id}:")
    print(f"  Q: {qa.question}")
    print(f"  A: {qa.answer}")

    identity = TEMPLATES.identity_templates("en")[0]
    qa2 = instantiate_entity_qa(identity, "Taj Mahal", "a 17th-century mausoleum in India")
    print(f"\nidentity template {identity.id}:")
    print(f"  Q: {qa2.question}")
    print(f"  A: {qa2.answer}")

    # Non-English rendering: time values and labels follow the record language.
    when = ClaimValue(kind="time", value="+1879-03-14T00:00:00Z", precision=11)
    print(f"\ntime claim renders as {render_value(when, {}, 'en')!r}")
    print(f"label pick for hi with en fallback: "
          f"{pick_label({'en': 'Taj Mahal', 'hi': 'ताज महल'}, 'hi')!r}")

    triplets = pair_images_with_qa(
        "Q9141",
        ["File:Taj Mahal exterior.jpg", "File:Taj door.jpg"],
        [qa2],
    )
    print(f"\n{len(triplets)} VQA triplets after crossing with the image manifest:")
    for t in triplets:
        print(f"  [{t.image_title}] {t.qa.question}")


if __name__ == "__main__":
    main()
