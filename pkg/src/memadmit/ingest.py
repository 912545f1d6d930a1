"""Dataset parsing and the turn -> candidate normalization pipeline.

Pipeline per turn: ``segment_turn`` -> ``is_noise`` -> ``normalize_candidate``.
Everything is rule based and deterministic; nothing here calls a model.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Sequence

import jsonschema

from memadmit.core import CandidateMemory, Conversation, Domain, InputError, Turn


class DatasetError(InputError):
    """The dataset file is unreadable or at least one line fails the schema."""

    def __init__(self, message: str, line_errors: Sequence[tuple[int, str]] = ()):
        self.line_errors = list(line_errors)
        if self.line_errors:
            detail = "; ".join(f"line {n}: {msg}" for n, msg in self.line_errors[:20])
            message = f"{message}: {detail}"
        super().__init__(message)


RECORD_SCHEMA = {
    "type": "object",
    "required": ["conversation_id", "domain", "turns"],
    "additionalProperties": False,
    "properties": {
        "conversation_id": {"type": "string", "minLength": 1},
        "domain": {"type": "string", "enum": ["personal", "professional", "other"]},
        "turns": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "speaker", "text", "ts"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer"},
                    "speaker": {"type": "string", "minLength": 1},
                    "text": {"type": "string"},
                    "ts": {"type": "integer"},
                },
            },
        },
        "labels": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["text", "turn_ids", "admit"],
                "additionalProperties": False,
                "properties": {
                    "text": {"type": "string", "minLength": 1},
                    "turn_ids": {"type": "array", "minItems": 1, "items": {"type": "integer"}},
                    "admit": {"type": "boolean"},
                },
            },
        },
    },
}

_VALIDATOR = jsonschema.Draft7Validator(RECORD_SCHEMA)


@dataclass(frozen=True)
class DatasetRecord:
    conversation: Conversation
    # None when the record carries no ``labels`` field.
    labels: Optional[tuple[CandidateMemory, ...]] = None


@dataclass
class Dataset:
    records: list[DatasetRecord] = field(default_factory=list)
    content_hash: str = ""

    @property
    def conversations(self) -> list[Conversation]:
        return [r.conversation for r in self.records]

    @property
    def labeled(self) -> bool:
        return bool(self.records) and all(r.labels is not None for r in self.records)

    def __len__(self) -> int:
        return len(self.records)


def _candidate_id(*parts: object) -> str:
    key = "\x1f".join(str(p) for p in parts)
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def _record_from_obj(obj: dict) -> DatasetRecord:
    conv_id = obj["conversation_id"]
    turns = tuple(
        Turn(turn_id=t["id"], session_id=conv_id, speaker=t["speaker"], text=t["text"], timestamp=t["ts"])
        for t in obj["turns"]
    )
    conv = Conversation(conv_id, turns, Domain.parse(obj["domain"]))
    labels = None
    if "labels" in obj:
        by_id = {t.turn_id: t for t in turns}
        out = []
        for i, lab in enumerate(obj["labels"]):
            missing = [tid for tid in lab["turn_ids"] if tid not in by_id]
            if missing:
                raise InputError(f"label {i} references unknown turn ids {missing}")
            src = tuple(sorted(set(lab["turn_ids"])))
            last = by_id[src[-1]]
            out.append(
                CandidateMemory(
                    candidate_id=_candidate_id(conv_id, "label", i),
                    text=lab["text"].strip(),
                    source_turn_ids=src,
                    speaker=last.speaker,
                    event_time=last.timestamp,
                    gold_label=lab["admit"],
                    conversation_id=conv_id,
                )
            )
        labels = tuple(out)
    return DatasetRecord(conv, labels)


def parse_dataset(path: str | Path) -> Dataset:
    """Load a line-delimited dataset file.

    The whole load fails if any line is malformed; the error lists every bad
    line number so the file can be fixed in one pass.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"dataset {path} is not UTF-8") from exc

    records: list[DatasetRecord] = []
    errors: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append((lineno, f"invalid JSON ({exc.msg})"))
            continue
        schema_errors = sorted(_VALIDATOR.iter_errors(obj), key=lambda e: list(e.path))
        if schema_errors:
            e = schema_errors[0]
            where = "/".join(str(p) for p in e.path) or "<record>"
            errors.append((lineno, f"{where}: {e.message}"))
            continue
        try:
            rec = _record_from_obj(obj)
        except InputError as exc:
            errors.append((lineno, str(exc)))
            continue
        if rec.conversation.conversation_id in seen_ids:
            errors.append((lineno, f"duplicate conversation_id {rec.conversation.conversation_id!r}"))
            continue
        seen_ids.add(rec.conversation.conversation_id)
        records.append(rec)

    if errors:
        raise DatasetError(f"schema violations in {path}", errors)
    if not records:
        raise DatasetError(f"dataset {path} contains no records")
    return Dataset(records, hashlib.sha256(raw).hexdigest())


def conversation_to_record(conv: Conversation, labels: Optional[Sequence[CandidateMemory]] = None) -> dict:
    obj: dict = {
        "conversation_id": conv.conversation_id,
        "domain": conv.domain.value,
        "turns": [{"id": t.turn_id, "speaker": t.speaker, "text": t.text, "ts": t.timestamp} for t in conv.turns],
    }
    if labels is not None:
        obj["labels"] = [
            {"text": c.text, "turn_ids": list(c.source_turn_ids), "admit": bool(c.gold_label)} for c in labels
        ]
    return obj


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

_ABBREVIATIONS = frozenset(
    "mr mrs ms dr prof sr jr st vs etc inc ltd co mt approx dept est no fig "
    "jan feb mar apr jun jul aug sep sept oct nov dec e.g i.e a.m p.m u.s u.k".split()
)

_SENTENCE_END = re.compile(r"""([.!?]+|…)(["')\]]*)(\s+)""")

_SUBJECT_PRONOUNS = frozenset(
    "i i'm i've i'll i'd we we're we've we'll we'd you you're you've you'll you'd "
    "he he's she she's they they're they've they'll it it's there there's that's".split()
)
_POSSESSIVES = frozenset("my our your his her their its".split())
_FINITE_VERBS = frozenset(
    "is was are were am has have had does did do will would can could should might must "
    "lives works loves likes hates wants needs goes went got gets makes made takes took "
    "moved started plays studies teaches owns runs knows thinks says said lost won "
    "rides drives eats reads writes walks cooks travels uses sings swims visits keeps "
    "loved liked hated wanted needed".split()
)
_COORDINATORS = re.compile(r",?\s+\b(and|but|so|yet|or)\b\s+", re.IGNORECASE)
_WORD = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z]+)*")


def _split_sentences(text: str) -> list[str]:
    out: list[str] = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        end_punct = m.group(1)
        before = text[start : m.start()]
        last_word = before.split()[-1].lower() if before.split() else ""
        rest = text[m.end() :]
        if end_punct == "." and (last_word in _ABBREVIATIONS or re.fullmatch(r"[a-z]", last_word)):
            continue
        if end_punct == "." and rest and rest[0].islower():
            continue
        out.append(text[start : m.end(2)].strip())
        start = m.end()
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return [s for s in out if s]


def _starts_clause(words: list[str], after_comma: bool) -> bool:
    """Does ``words`` open with a subject followed closely by a finite verb?

    Without a comma before the conjunction only pronoun, possessive or
    capitalized subjects count, which keeps "salt and pepper" together.
    """
    if len(words) < 2:
        return False
    first = words[0].lower().replace("’", "'")
    if first in _SUBJECT_PRONOUNS:
        return True
    look = [w.lower() for w in words[1:4]]
    if after_comma and any(w in _SUBJECT_PRONOUNS for w in look):
        return True  # fronted adverbial: ", and on weekends I swim"
    if after_comma or first in _POSSESSIVES or words[0][0].isupper():
        return any(w in _FINITE_VERBS or w in _IRREGULAR_PAST or (w.endswith("ed") and len(w) > 3) for w in look)
    return False


def _split_clauses(sentence: str) -> list[str]:
    units: list[str] = []
    start = 0
    for m in _COORDINATORS.finditer(sentence):
        left = sentence[start : m.start()]
        right = sentence[m.end() :]
        if len(_WORD.findall(left)) < 2:
            continue
        if not _starts_clause(_WORD.findall(right), m.group(0).startswith(",")):
            continue
        units.append(left.strip(" ,;"))
        start = m.end()
    units.append(sentence[start:].strip(" ,;"))
    return [u for u in units if u]


def segment_turn(turn: Turn | str) -> list[str]:
    """Split a turn into atomic units: sentences, then independent clauses."""
    text = turn.text if isinstance(turn, Turn) else turn
    text = " ".join(text.split())
    if not text:
        return []
    units: list[str] = []
    for sentence in _split_sentences(text):
        units.extend(_split_clauses(sentence))
    return units


# ---------------------------------------------------------------------------
# Noise filter
# ---------------------------------------------------------------------------

MIN_CONTENT_TOKENS = 3

_ACK_WORDS = frozenset(
    """hi hello hey hiya yo thanks thank thx ty you so much very ok okay k kk sure yes yeah yep yup
    no nope nah cool nice great awesome good sounds fine perfect right alright all gotcha got it i
    see me too same here bye goodbye later cya night morning afternoon evening lol haha hahaha lmao
    hmm hm um uh uhh mhm oh ah wow totally absolutely agreed indeed exactly true welcome that that's
    is to a the there well and np problem worries care take talk soon again for how are doing
    you're glad hear will do guys everyone know makes sense s re
    lovely luck fun""".split()
)
_FILLER = frozenset("um uh uhh hmm hm mhm oh ah lol haha hahaha lmao well ok okay yeah like".split())


def _word_tokens(text: str) -> list[str]:
    out: list[str] = []
    for w in _WORD.findall(text.replace("’", "'")):
        parts = w.lower().split("'")
        out.extend(p for p in parts if p)
    return out


def is_noise(unit: str) -> bool:
    """True for greetings, acknowledgments, backchannels and near-empty units."""
    tokens = _word_tokens(unit)
    if not tokens:
        return True
    if all(t in _ACK_WORDS for t in tokens):
        return True
    content = [t for t in tokens if t not in _FILLER]
    return len(content) < MIN_CONTENT_TOKENS


# ---------------------------------------------------------------------------
# Reference resolution
# ---------------------------------------------------------------------------

_WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
_NUMBER_WORDS = {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
}
_PREPOSITIONS = frozenset("since until till from before after by of through on in".split())
_MODALS = frozenset("will would can could should shall may might must".split())
_ADVERBS = frozenset(
    """really also just always never still usually often actually definitely recently finally
    already totally absolutely sometimes probably honestly literally mostly basically truly
    currently seriously only even""".split()
)
_IRREGULAR_PAST = frozenset(
    """went got made took saw met bought had did was were came left found thought told said ran
    wrote began felt kept lost won ate drank drove flew gave knew sold sent spent taught brought
    built caught fell forgot heard held paid sat slept spoke stood swam understood woke wore became
    broke chose grew hid hit hurt let put quit set shut cut cost""".split()
)
_IRREGULAR_3RD = {"am": "is", "are": "is", "have": "has", "do": "does", "go": "goes", "don't": "doesn't",
                  "were": "was", "'m": "is", "'re": "is", "'ve": "has"}
_THIRD_PERSON = frozenset("he she they him her them his hers their theirs".split())
_UNHANDLED_TEMPORAL = re.compile(
    r"\b(this (?:week|weekend|month|year|morning|afternoon|evening)|tonight|recently|soon|"
    r"(?:next|last) (?:january|february|march|april|may|june|july|august|september|october|"
    r"november|december|weekend|summer|winter|spring|fall|autumn))\b",
    re.IGNORECASE,
)


def _conjugate(verb: str) -> str:
    low = verb.lower()
    if low in _IRREGULAR_3RD:
        return _IRREGULAR_3RD[low]
    if (
        not low.isalpha()
        or low in _MODALS
        or low in _IRREGULAR_PAST
        or low.endswith("ed")
        or (low.endswith("s") and not low.endswith("ss"))
    ):
        return verb
    if re.search(r"(s|sh|ch|x|z|o)$", low):
        return verb + "es"
    if re.search(r"[^aeiou]y$", low):
        return verb[:-1] + "ies"
    return verb + "s"


def _conjugate_after(match_text: str) -> str:
    """Conjugate the verb in '<adverb>? <verb>' for a third-person singular subject."""
    words = match_text.split(" ")
    if words and words[0].lower() in _ADVERBS and len(words) > 1:
        return " ".join([words[0], _conjugate(words[1])] + words[2:])
    return " ".join([_conjugate(words[0])] + words[1:]) if words else match_text


def _possessive(name: str) -> str:
    return name + ("'" if name.endswith("s") else "'s")


def _sub_pronouns(text: str, speaker: str, addressee: Optional[str], flags: list[str]) -> str:
    s = speaker
    text = re.sub(r"\bI['’]m\b", f"{s} is", text)
    text = re.sub(r"\bI['’]ve\b", f"{s} has", text)
    text = re.sub(r"\bI['’]ll\b", f"{s} will", text)
    text = re.sub(r"\bI['’]d\b", f"{s} would", text)
    text = re.sub(
        r"\bI\s+([A-Za-z']+(?:\s+[A-Za-z']+)?)",
        lambda m: f"{s} " + _conjugate_after(m.group(1)),
        text,
    )
    text = re.sub(r"\bI\b", s, text)
    text = re.sub(r"\b[Mm]yself\b", s, text)
    text = re.sub(r"\b[Mm]y\b", _possessive(s), text)
    text = re.sub(r"\b[Mm]ine\b", _possessive(s), text)
    text = re.sub(r"\b[Mm]e\b", s, text)

    has_second = re.search(r"\b(you|your|yours|yourself)\b", text, re.IGNORECASE)
    has_plural = re.search(r"\b(we|us|our|ours|ourselves)\b", text, re.IGNORECASE)
    if addressee is None:
        if has_second:
            flags.append("pronoun:you")
        if has_plural:
            flags.append("pronoun:we")
    else:
        a = addressee
        both = f"{s} and {a}"
        text = re.sub(r"\b[Yy]ou['’]re\b", f"{a} is", text)
        text = re.sub(r"\b[Yy]ou['’]ve\b", f"{a} has", text)
        text = re.sub(r"\b[Yy]ou['’]ll\b", f"{a} will", text)
        text = re.sub(r"\b[Yy]ou['’]d\b", f"{a} would", text)
        # Subject position only: unit start or after a clause opener.
        text = re.sub(
            r"(^|(?:\b(?:and|but|so|because|if|when|that|since)\s+)|,\s+)[Yy]ou\s+([A-Za-z']+(?:\s+[A-Za-z']+)?)",
            lambda m: f"{m.group(1)}{a} " + _conjugate_after(m.group(2)),
            text,
        )
        text = re.sub(r"\b[Yy]ourself\b", a, text)
        text = re.sub(r"\b[Yy]ours\b", _possessive(a), text)
        text = re.sub(r"\b[Yy]our\b", _possessive(a), text)
        text = re.sub(r"\b[Yy]ou\b", a, text)
        text = re.sub(r"\b[Ww]e['’]re\b", f"{both} are", text)
        text = re.sub(r"\b[Ww]e['’]ve\b", f"{both} have", text)
        text = re.sub(r"\b[Ww]e['’]ll\b", f"{both} will", text)
        text = re.sub(r"\b[Ww]e\b", both, text)
        text = re.sub(r"\b[Uu]s\b", both, text)
        text = re.sub(r"\b[Oo]urselves\b", both, text)
        text = re.sub(r"\b[Oo]urs?\b", _possessive(both), text)

    for w in _word_tokens(text):
        if w in _THIRD_PERSON:
            flag = f"pronoun:{w}"
            if flag not in flags:
                flags.append(flag)
    return text


def _iso(d: date) -> str:
    return d.isoformat()


def _week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


def _month_shift(d: date, months: int) -> str:
    idx = d.year * 12 + (d.month - 1) + months
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def _looks_past(text: str) -> bool:
    for w in _word_tokens(text):
        if w in _IRREGULAR_PAST or (w.endswith("ed") and len(w) > 3) or w == "ago":
            return True
    return False


def _sub_dates(text: str, timestamp: int, flags: list[str]) -> str:
    today = datetime.fromtimestamp(timestamp, tz=timezone.utc).date()
    past = _looks_past(text)

    def emit(prefix_word: Optional[str], kind: str, value: str) -> str:
        # kind: day -> "on X", week -> "in the week of X", month/year -> "in X"
        if prefix_word is not None:
            head = "the week of " if kind == "week" else ""
            return f"{prefix_word} {head}{value}"
        if kind == "day":
            return f"on {value}"
        if kind == "week":
            return f"in the week of {value}"
        return f"in {value}"

    prep = r"(?:\b(" + "|".join(sorted(_PREPOSITIONS)) + r")\s+)?"

    def simple(m: re.Match) -> str:
        word = m.group(2).lower()
        delta = {"yesterday": -1, "today": 0, "tomorrow": 1}[word]
        return emit(m.group(1), "day", _iso(today + timedelta(days=delta)))

    text = re.sub(prep + r"\b(yesterday|today|tomorrow)\b", simple, text, flags=re.IGNORECASE)

    def ago(m: re.Match) -> str:
        raw = m.group(2).lower()
        n = int(raw) if raw.isdigit() else _NUMBER_WORDS[raw]
        unit = m.group(3).lower().rstrip("s")
        if unit == "day":
            return emit(m.group(1), "day", _iso(today - timedelta(days=n)))
        return emit(m.group(1), "week", _iso(_week_start(today - timedelta(weeks=n))))

    numbers = "|".join(list(_NUMBER_WORDS) + [r"\d+"])
    text = re.sub(prep + rf"\b({numbers})\s+(days?|weeks?)\s+ago\b", ago, text, flags=re.IGNORECASE)

    def rel(m: re.Match) -> str:
        direction = -1 if m.group(2).lower() == "last" else 1
        what = m.group(3).lower()
        if what in _WEEKDAYS:
            target = _WEEKDAYS.index(what)
            d = today + timedelta(days=direction)
            while d.weekday() != target:
                d += timedelta(days=direction)
            return emit(m.group(1), "day", _iso(d))
        if what == "week":
            return emit(m.group(1), "week", _iso(_week_start(today + timedelta(weeks=direction))))
        if what == "month":
            return emit(m.group(1), "month", _month_shift(today, direction))
        return emit(m.group(1), "year", f"{today.year + direction:04d}")

    text = re.sub(
        prep + r"\b(last|next)\s+(" + "|".join(_WEEKDAYS) + r"|week|month|year)\b",
        rel,
        text,
        flags=re.IGNORECASE,
    )

    def bare_weekday(m: re.Match) -> str:
        target = _WEEKDAYS.index(m.group(2).lower())
        direction = -1 if past else 1
        d = today + timedelta(days=direction)
        while d.weekday() != target:
            d += timedelta(days=direction)
        return emit(m.group(1), "day", _iso(d))

    text = re.sub(prep + r"\b(" + "|".join(_WEEKDAYS) + r")s?\b", bare_weekday, text, flags=re.IGNORECASE)

    for m in _UNHANDLED_TEMPORAL.finditer(text):
        flags.append(f"temporal:{m.group(1).lower()}")
    return text


def resolve_references(
    text: str, speaker: str, addressee: Optional[str], timestamp: int
) -> tuple[str, tuple[str, ...]]:
    """Rewrite speaker pronouns and relative dates; return (text, unresolved flags)."""
    flags: list[str] = []
    out = _sub_pronouns(text, speaker, addressee, flags)
    out = _sub_dates(out, timestamp, flags)
    out = " ".join(out.split())
    if out and out[0].islower():
        out = out[0].upper() + out[1:]
    return out, tuple(flags)


def addressee_for(turn: Turn, history: Sequence[Turn]) -> Optional[str]:
    for prev in reversed(history):
        if prev.turn_id < turn.turn_id and prev.speaker != turn.speaker:
            return prev.speaker
    return None


def normalize_candidate(
    unit: str,
    history: Sequence[Turn],
    turn: Turn,
    *,
    conversation_id: str = "",
    unit_index: int = 0,
) -> CandidateMemory:
    text, flags = resolve_references(unit, turn.speaker, addressee_for(turn, history), turn.timestamp)
    return CandidateMemory(
        candidate_id=_candidate_id(conversation_id, turn.turn_id, unit_index),
        text=text,
        source_turn_ids=(turn.turn_id,),
        speaker=turn.speaker,
        event_time=turn.timestamp,
        gold_label=None,
        conversation_id=conversation_id,
        unresolved=flags,
    )


def extract_candidates(conversation: Conversation) -> list[CandidateMemory]:
    out: list[CandidateMemory] = []
    for i, turn in enumerate(conversation.turns):
        history = conversation.turns[:i]
        for idx, unit in enumerate(segment_turn(turn)):
            if is_noise(unit):
                continue
            out.append(
                normalize_candidate(
                    unit, history, turn, conversation_id=conversation.conversation_id, unit_index=idx
                )
            )
    return out


def candidates_for(record: DatasetRecord) -> list[CandidateMemory]:
    """Labeled candidates verbatim when present, else the extraction pipeline."""
    if record.labels is not None:
        return sorted(record.labels, key=lambda c: c.last_source_turn)
    return extract_candidates(record.conversation)


def candidate_to_dict(c: CandidateMemory) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "conversation_id": c.conversation_id,
        "text": c.text,
        "source_turn_ids": list(c.source_turn_ids),
        "speaker": c.speaker,
        "event_time": c.event_time,
        "gold_label": c.gold_label,
        "unresolved": list(c.unresolved),
    }
