"""Shared tokenizer and the LCS-based ROUGE-L F-measure."""

from __future__ import annotations

import re
from typing import Sequence

_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)

STOPWORDS = frozenset(
    """a an the and or but so yet nor of to in on at by for with from into onto about as than then
    is am are was were be been being has have had do does did will would can could should shall may
    might must i me my mine myself we us our ours you your yours he him his she her hers it its they
    them their theirs this that these those there here what which who whom whose when where why how
    not no just very really also too s t im ive ill id dont doesnt didnt isnt wasnt arent
    all any some each every more most other such only own same up down out over under again once""".split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate_tokens: Sequence[str], reference_tokens: Sequence[str]) -> float:
    """ROUGE-L F-measure (beta = 1). Zero when either side is empty."""
    if not candidate_tokens or not reference_tokens:
        return 0.0
    lcs = lcs_length(candidate_tokens, reference_tokens)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate_tokens)
    r = lcs / len(reference_tokens)
    return 2 * p * r / (p + r)
