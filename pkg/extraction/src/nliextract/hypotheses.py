"""Label descriptions to NLI hypothesis strings."""

from __future__ import annotations

from typing import Sequence

from .config import DEFAULT_TEMPLATE, ExtractionError, validate_template


def build_hypotheses(descriptions: Sequence[str], template: str = DEFAULT_TEMPLATE) -> list[str]:
    """Instantiate the hypothesis template once per label description.

    The default template turns the description "ethics" into the hypothesis
    "This is about ethics".  Descriptions are inserted verbatim; they must be
    non-blank because an empty hypothesis would make the NLI query
    meaningless for that label.
    """
    validate_template(template)
    hypotheses = []
    for idx, description in enumerate(descriptions):
        if not isinstance(description, str) or not description.strip():
            raise ExtractionError(f"label {idx} has an empty description")
        hypotheses.append(template.format(description))
    return hypotheses
