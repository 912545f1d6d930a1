"""Rule-based content-type classification and the type prior table.

Rules are tried in order; the first match wins and ``Fact`` is the fallback,
so every string maps to exactly one type. Copula/adjective and
modal/infinitive patterns stand in for part-of-speech cues.
"""

from __future__ import annotations

import re
from typing import Mapping, Optional

from memadmit.core import CandidateMemory, ContentType, InputError

DEFAULT_TYPE_PRIORS: dict[ContentType, float] = {
    ContentType.PREFERENCE_OR_IDENTITY: 0.9,
    ContentType.FACT: 0.7,
    ContentType.PLAN_OR_GOAL: 0.5,
    ContentType.TRANSIENT_STATE: 0.2,
}

_DIET_AND_IDENTITY_ADJ = (
    "vegetarian|vegan|pescatarian|lactose intolerant|gluten[- ]free|diabetic|celiac|"
    "left[- ]handed|right[- ]handed|colou?r ?blind|introverted|extroverted|introvert|extrovert|"
    "religious|atheist|christian|muslim|jewish|buddhist|hindu|catholic|gay|straight|bisexual|"
    "married|single|divorced|engaged|widowed|retired|pregnant|allergic"
)
_IDENTITY_NOUNS = (
    "name|birthday|hometown|nationality|age|middle name|nickname|favou?rite \\w+|wife|husband|"
    "partner|son|daughter|mother|father|mom|dad|brother|sister|pronouns"
)

_PREFERENCE = re.compile(
    r"(?<!would )(?<!'d )(?<!’d )\b(loves?|hates?|likes?|dislikes?|adores?|prefers?|enjoys?|detests?)\b"
    r"|\bfavou?rite\b"
    r"|\b(can't|cannot|can not|couldn't) stand\b"
    r"|\ballergic to\b"
    rf"|\b(is|am|are|was born|has always been) ({_DIET_AND_IDENTITY_ADJ})\b"
    r"|\b(is|am|are) (a|an) (?!bit\b|little\b|lot\b)\w+"
    r"|\b(identifies|identify) as\b"
    r"|\b(was born|grew up) (in|on|at)\b"
    r"|\bis from\b"
    r"|\b(believes?|values?) in\b"
    r"|\bis (?:a )?(?:big|huge) fan of\b"
    r"|\bis (?:really |very )?(?:into|passionate about)\b"
    rf"|'s ({_IDENTITY_NOUNS}) (is|was|are)\b"
    r"|\bhas (?:a |an |two |three )?(?:sons?|daughters?|kids|children|siblings|brothers?|sisters?|"
    r"wife|husband|dog|cat|pets?)\b"
    r"|\b(never|always) (eats?|drinks?|wears?|uses?)\b",
    re.IGNORECASE,
)

_PLAN = re.compile(
    r"\b(plans?|planning|planned) to\b"
    r"|\b(intends?|intending|hopes?|hoping|wants?|aims?|aiming|aspires?|expects?) to\b"
    r"|\b(would|'d|’d) (like|love) to\b"
    r"|\b(is|am|are) (going|about|trying|preparing|saving up|saving) (to|for)\b"
    r"|\b(is|am|are) (thinking|considering|dreaming) (about|of)\b"
    r"|\b(will|'ll|’ll|shall) (?!be (?:tired|sick|busy)\b)\w+"
    r"|\bgoals?\b|\bresolution\b|\bbucket list\b"
    r"|\b(is|am|are) (scheduled|signed up|registered|booked)\b"
    r"|\bhas (an? )?(appointment|interview|exam|deadline|trip|flight) (on|in|next|scheduled)\b",
    re.IGNORECASE,
)

_TRANSIENT = re.compile(
    r"\b(tired|sleepy|exhausted|hungry|thirsty|bored|stressed|anxious|nervous|excited|"
    r"happy|sad|upset|angry|mad|grumpy|sick|ill|unwell|busy|frustrated|annoyed|cranky|"
    r"overwhelmed|relieved|worried|lonely|hungover|jet[- ]lagged|sore|cold|freezing|hot|sweaty|"
    r"feeling|feels|feel|mood|headache|stuffed|full)\b"
    r"|\b(raining|rainy|sunny|snowing|snowy|cloudy|windy|stormy|foggy|humid|weather)\b"
    r"|\b(right now|at the moment|currently|this morning|this afternoon|this evening|tonight|today)\b"
    r"|\b(is|am|are) (stuck in traffic|running late|on (?:the|a) (?:bus|train|break)|waiting)\b",
    re.IGNORECASE,
)


def classify_type(candidate: CandidateMemory | str) -> ContentType:
    text = candidate.text if isinstance(candidate, CandidateMemory) else candidate
    text = text.replace("’", "'")
    if _PREFERENCE.search(text):
        return ContentType.PREFERENCE_OR_IDENTITY
    if _PLAN.search(text):
        return ContentType.PLAN_OR_GOAL
    if _TRANSIENT.search(text):
        return ContentType.TRANSIENT_STATE
    return ContentType.FACT


def parse_type_priors(mapping: Optional[Mapping[str, float]]) -> dict[ContentType, float]:
    """Merge a ``{type name: prior}`` override onto the defaults."""
    priors = dict(DEFAULT_TYPE_PRIORS)
    for key, value in (mapping or {}).items():
        try:
            ctype = ContentType(key)
        except ValueError as exc:
            raise InputError(f"unknown content type {key!r}") from exc
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise InputError(f"type prior for {key} must lie in [0, 1], got {value}")
        priors[ctype] = value
    return priors


def score_type_prior(
    candidate: CandidateMemory | str, priors: Optional[Mapping[ContentType, float]] = None
) -> float:
    table = DEFAULT_TYPE_PRIORS if priors is None else priors
    return table[classify_type(candidate)]
