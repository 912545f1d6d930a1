"""Versioned utility-rating prompt. The version string keys the score cache."""

from __future__ import annotations

PROMPT_VERSION = "utility-v1"

UTILITY_PROMPT = """\
You are deciding whether a statement from a conversation is worth keeping in an
assistant's long-term memory.

Rate how likely the statement is to be useful in future interactions, on an
integer scale from 0 (never useful) to 10 (certainly useful). Consider whether it
is actionable, whether it helps answer likely follow-up questions, and whether it
records a persistent preference, constraint or fact about a person.

Answer with a single integer and nothing else.

Statement:
<<<{text}>>>
"""

_OPEN, _CLOSE = "<<<", ">>>"


def render_prompt(text: str) -> str:
    return UTILITY_PROMPT.format(text=text)


def candidate_text_from_prompt(prompt: str) -> str:
    """Recover the statement embedded by ``render_prompt`` (used by stubs)."""
    start = prompt.rfind(_OPEN)
    end = prompt.rfind(_CLOSE)
    if start < 0 or end < start:
        return prompt
    return prompt[start + len(_OPEN) : end]
