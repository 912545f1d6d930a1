from __future__ import annotations

from pathlib import Path

import pytest

from memadmit.core import CandidateMemory, Conversation, Domain, Turn
from memadmit.synthetic import bundled_corpus_path

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent.parent / "src" / "memadmit" / "data"
T0 = 1_683_720_000  # 2023-05-10T12:00:00Z


def make_turn(turn_id: int, text: str, speaker: str = "Ana", ts: int = T0, session: str = "c1") -> Turn:
    return Turn(turn_id, session, speaker, text, ts)


def make_conversation(texts, speakers=("Ana", "Ben"), step: int = 60, cid: str = "c1",
                      domain: Domain = Domain.PERSONAL) -> Conversation:
    turns = tuple(make_turn(i, t, speakers[i % len(speakers)], T0 + i * step, cid) for i, t in enumerate(texts))
    return Conversation(cid, turns, domain)


def make_candidate(text: str, cid: str = "x", turns=(0,), speaker: str = "Ana", event_time: int = T0,
                   label=None) -> CandidateMemory:
    return CandidateMemory(cid, text, tuple(turns), speaker, event_time, label, "c1")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def synthetic_path() -> Path:
    return bundled_corpus_path()


@pytest.fixture
def sample_path() -> Path:
    return DATA / "sample_conversations.jsonl"


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
