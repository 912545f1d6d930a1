"""Deterministic synthetic labeled corpus.

Each statement comes from a template tagged with its content type. The gold
label is "admit" for preference/identity and fact statements, "reject" for
plans and transient states, then each label is flipped with probability
``noise``. Greeting and acknowledgment turns are interleaved unlabeled.

Regenerate the bundled copy with ``python -m memadmit.synthetic PATH``.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

from memadmit.core import ContentType

P, F, G, T = (
    ContentType.PREFERENCE_OR_IDENTITY,
    ContentType.FACT,
    ContentType.PLAN_OR_GOAL,
    ContentType.TRANSIENT_STATE,
)
ADMIT_TYPES = frozenset({P, F})

NAMES = ["Ana", "Bruno", "Chen", "Dara", "Elif", "Farid", "Greta", "Hiro", "Iris", "Jonas", "Kemal", "Lena",
         "Mateo", "Nadia", "Omar", "Priya"]

SLOTS = {
    "food": ["sushi", "spicy ramen", "dark chocolate", "tacos", "pho", "falafel", "blue cheese", "mango sticky rice"],
    "allergen": ["peanuts", "shellfish", "cats", "pollen", "penicillin", "sesame"],
    "band": ["Radiohead", "Fleetwood Mac", "Daft Punk", "Bon Iver", "ABBA"],
    "activity": ["hiking", "rock climbing", "pottery", "salsa dancing", "chess", "surfing", "baking"],
    "city": ["Denver", "Lisbon", "Osaka", "Nairobi", "Montreal", "Rome", "Hanoi", "Oslo"],
    "job": ["nurse", "carpenter", "pharmacist", "teacher", "pilot", "architect"],
    "pet": ["Max", "Luna", "Biscuit", "Pepper", "Mochi"],
    "relative": ["sister", "brother", "cousin", "grandmother", "uncle"],
    "item": ["bike", "piano", "camera", "kayak", "telescope"],
    "language": ["Japanese", "Portuguese", "Swahili", "Korean", "German"],
    "tool": ["Jira", "Notion", "Figma", "Kubernetes", "Postgres", "Slack"],
    "company": ["Acme", "Initech", "Globex", "Umbrella Labs", "Hooli"],
    "role": ["product manager", "data engineer", "designer", "sales lead", "staff engineer"],
    "product": ["the mobile app", "the billing service", "the new dashboard", "the partner API"],
    "n": ["four", "six", "eight", "twelve"],
    "year": ["2015", "2018", "2019", "2021"],
    "course": ["statistics", "marketing", "Spanish", "public speaking"],
}

# (first-person turn, third-person memory, type); {S} is the speaker.
PERSONAL = [
    ("I love {food}.", "{S} loves {food}.", P),
    ("I'm allergic to {allergen}.", "{S} is allergic to {allergen}.", P),
    ("My favorite band is {band}.", "{S}'s favorite band is {band}.", P),
    ("I really hate {activity}.", "{S} really hates {activity}.", P),
    ("I'm a {job}.", "{S} is a {job}.", P),
    ("I grew up in {city}.", "{S} grew up in {city}.", P),
    ("I'm vegetarian.", "{S} is vegetarian.", P),
    ("My {relative} lives in {city}.", "{S}'s {relative} lives in {city}.", F),
    ("I adopted a dog named {pet}.", "{S} adopted a dog named {pet}.", F),
    ("I bought a used {item} from a neighbor.", "{S} bought a used {item} from a neighbor.", F),
    ("My apartment has two bedrooms.", "{S}'s apartment has two bedrooms.", F),
    ("My {relative} works as a {job} in {city}.", "{S}'s {relative} works as a {job} in {city}.", F),
    ("I studied {course} at university.", "{S} studied {course} at university.", F),
    ("I plan to visit {city} next summer.", "{S} plans to visit {city} next summer.", G),
    ("I want to learn {language}.", "{S} wants to learn {language}.", G),
    ("I'm going to sign up for {activity} classes.", "{S} is going to sign up for {activity} classes.", G),
    ("I'm saving for a trip to {city}.", "{S} is saving for a trip to {city}.", G),
    ("I hope to run a marathon someday.", "{S} hopes to run a marathon someday.", G),
    ("I'm so tired right now.", "{S} is tired right now.", T),
    ("I'm hungry at the moment.", "{S} is hungry at the moment.", T),
    ("It's raining here.", "It is raining where {S} is.", T),
    ("I feel a bit bored.", "{S} feels a bit bored.", T),
    ("I'm stuck in traffic.", "{S} is stuck in traffic.", T),
]

PROFESSIONAL = [
    ("I prefer async standups.", "{S} prefers async standups.", P),
    ("I love working with {tool}.", "{S} loves working with {tool}.", P),
    ("I hate long status meetings.", "{S} hates long status meetings.", P),
    ("I'm a {role}.", "{S} is a {role}.", P),
    ("I can't stand unreviewed merges.", "{S} can't stand unreviewed merges.", P),
    ("I work at {company}.", "{S} works at {company}.", F),
    ("Our team uses {tool} for planning.", "{S}'s team uses {tool} for planning.", F),
    ("I manage a team of {n} engineers.", "{S} manages a team of {n} engineers.", F),
    ("I joined {company} in {year}.", "{S} joined {company} in {year}.", F),
    ("Our office is in {city}.", "{S}'s office is in {city}.", F),
    ("My manager reports to the CTO.", "{S}'s manager reports to the CTO.", F),
    ("I plan to launch {product} next quarter.", "{S} plans to launch {product} next quarter.", G),
    ("I want to get promoted to {role}.", "{S} wants to get promoted to {role}.", G),
    ("I'm going to migrate the backlog to {tool}.", "{S} is going to migrate the backlog to {tool}.", G),
    ("I'm aiming to hire {n} designers.", "{S} is aiming to hire {n} designers.", G),
    ("I'm thinking about starting a company.", "{S} is thinking about starting a company.", G),
    ("I'm really busy right now.", "{S} is really busy right now.", T),
    ("I'm stressed about the demo.", "{S} is stressed about the demo.", T),
    ("The build server is down at the moment.", "The build server is down at the moment.", T),
    ("I'm running late for standup.", "{S} is running late for standup.", T),
    ("I feel exhausted after the offsite.", "{S} feels exhausted after the offsite.", T),
]

FILLERS = ["Hi!", "Hey, how are you?", "Thanks!", "Sounds good.", "Okay.", "Haha nice.", "Oh wow.", "Got it, thanks!"]

BASE_TS = 1_683_720_000  # 2023-05-10T12:00:00Z


def _fill(rng: random.Random, first: str, memory: str, speaker: str) -> tuple[str, str]:
    values = {k: rng.choice(v) for k, v in SLOTS.items()}
    values["S"] = speaker
    return first.format(**values), memory.format(**values)


def generate_corpus(n_conversations: int = 60, seed: int = 13, noise: float = 0.1) -> list[dict]:
    rng = random.Random(seed)
    records = []
    for c in range(n_conversations):
        domain = "personal" if c % 2 == 0 else "professional"
        templates = PERSONAL if domain == "personal" else PROFESSIONAL
        speakers = rng.sample(NAMES, 2)
        ts = BASE_TS + c * 86_400
        turns: list[dict] = []
        labels: list[dict] = []
        n_statements = rng.randint(15, 25)
        turn_id = 0
        for i in range(n_statements):
            speaker = speakers[i % 2]
            if rng.random() < 0.25:
                ts += rng.randint(30, 600)
                turns.append({"id": turn_id, "speaker": speaker, "text": rng.choice(FILLERS), "ts": ts})
                turn_id += 1
            # Occasional multi-day gaps give recency some spread.
            ts += rng.randint(60, 1800) if rng.random() < 0.85 else rng.randint(86_400, 4 * 86_400)
            first, memory, ctype = rng.choice(templates)
            turn_text, memory_text = _fill(rng, first, memory, speaker)
            turns.append({"id": turn_id, "speaker": speaker, "text": turn_text, "ts": ts})
            admit = ctype in ADMIT_TYPES
            if rng.random() < noise:
                admit = not admit
            labels.append({"text": memory_text, "turn_ids": [turn_id], "admit": admit})
            turn_id += 1
        records.append(
            {"conversation_id": f"syn-{c:03d}", "domain": domain, "turns": turns, "labels": labels}
        )
    return records


def template_types() -> list[tuple[str, ContentType]]:
    """Every (memory template with slots filled by first values, intended type)."""
    first_values = {k: v[0] for k, v in SLOTS.items()}
    first_values["S"] = NAMES[0]
    return [(m.format(**first_values), t) for _, m, t in PERSONAL + PROFESSIONAL]


def write_corpus(path: str | Path, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in generate_corpus(**kwargs):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def bundled_corpus_path() -> Path:
    return Path(__file__).parent / "data" / "synthetic_corpus.jsonl"


if __name__ == "__main__":
    write_corpus(sys.argv[1] if len(sys.argv) > 1 else bundled_corpus_path())
