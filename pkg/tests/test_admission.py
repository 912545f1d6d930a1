import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memadmit.admission import (
    MemoryEntry,
    MemoryStore,
    admit,
    find_conflict,
    format_decision,
    merge,
    process_conversation,
    read_decisions,
    read_store,
    write_decisions,
    write_store,
)
from memadmit.config import EngineConfig
from memadmit.core import AdmissionPolicy, InputError, Outcome
from memadmit.ingest import candidates_for, parse_dataset
from memadmit.policy import load_policy
from memadmit.scorers import FeatureExtractor, LookupEmbedder, StubUtilityProvider, UtilityScorer

from conftest import FIXTURES, T0, make_candidate, make_conversation


def _entry(eid, vec, text="t", score=0.5):
    v = np.asarray(vec, dtype=float)
    return MemoryEntry(eid, text, tuple(v / np.linalg.norm(v)), score, T0, T0, (eid,))


def _golden():
    cfg = EngineConfig.load(FIXTURES / "golden_config.yaml")
    rec = parse_dataset(FIXTURES / "golden_conversation.jsonl").records[0]
    policy = load_policy(FIXTURES / "golden_policy.json")
    return cfg, rec, policy


def test_golden_trace_library_level():
    cfg, rec, policy = _golden()
    store, decisions = process_conversation(rec.conversation, policy, MemoryStore(), cfg.build_extractor(),
                                            candidates=candidates_for(rec))
    lines = [format_decision(d) for d in decisions]
    assert lines == (FIXTURES / "golden_trace.jsonl").read_text().splitlines()
    assert [d.outcome for d in decisions] == [
        Outcome.ADMITTED, Outcome.ADMITTED, Outcome.REJECTED, Outcome.ADMITTED,
        Outcome.UPDATED, Outcome.REJECTED, Outcome.ADMITTED, Outcome.ADMITTED]
    assert len(store) == 5
    merged = store.get(decisions[4].conflict_id)
    assert merged.text == "Ana is exhausted" and merged.merge_count == 1 and merged.score == 0.53125
    assert merged.provenance == (decisions[1].candidate_id, decisions[4].candidate_id)


def test_threshold_above_one_admits_nothing():
    _, rec, _ = _golden()
    policy = AdmissionPolicy((0.2,) * 5, 1.01)
    store, decisions = process_conversation(rec.conversation, policy, MemoryStore(), FeatureExtractor(),
                                            candidates=candidates_for(rec))
    assert len(store) == 0 and all(d.outcome is Outcome.REJECTED for d in decisions)


def test_identical_text_is_not_a_conflict():
    store = MemoryStore((_entry("m-1", [1, 0], text="Ana loves jazz"),))
    assert find_conflict(make_candidate("ana loves jazz!"), np.array([1.0, 0.0]), store) is None
    assert find_conflict(make_candidate("Ana adores jazz"), np.array([1.0, 0.0]), store).entry_id == "m-1"


def test_conflict_requires_similarity_strictly_above_threshold():
    store = MemoryStore((_entry("m-1", [1, 0]),), conflict_similarity=0.85)
    v = np.array([0.85, np.sqrt(1 - 0.85**2)])
    assert find_conflict(make_candidate("other"), v, store) is None
    v = np.array([0.86, np.sqrt(1 - 0.86**2)])
    assert find_conflict(make_candidate("other"), v, store) is not None


def test_conflict_picks_most_similar_entry():
    store = MemoryStore((_entry("m-1", [0.9, 0.436]), _entry("m-2", [0.95, 0.312])))
    assert find_conflict(make_candidate("x"), np.array([1.0, 0.0]), store).entry_id == "m-2"


def test_merge_keeps_identity_and_unions_provenance():
    old = _entry("m-1", [1, 0], text="old", score=0.5)
    new = merge(make_candidate("new text", cid="c9"), np.array([0.0, 1.0]), 0.7, old, T0 + 5)
    assert (new.entry_id, new.admitted_at, new.updated_at) == ("m-1", T0, T0 + 5)
    assert new.text == "new text" and new.score == 0.7 and new.merge_count == 1
    assert new.provenance == ("m-1", "c9")


def test_store_invariants():
    with pytest.raises(InputError):
        MemoryStore((_entry("a", [1, 0]), _entry("a", [0, 1])))
    with pytest.raises(InputError):
        MemoryStore((_entry("a", [1, 0]), _entry("b", [0, 0, 1])))
    with pytest.raises(InputError):
        MemoryEntry("a", "t", (2.0, 0.0), 0.5, T0, T0, ("a",))


def test_rejection_leaves_store_untouched():
    conv = make_conversation(["I love jazz."])
    store = MemoryStore((_entry("m-1", [1] + [0] * 255),))
    decision, after = admit(make_candidate("Ana loves jazz.", turns=(0,)), conv.turns, store,
                            AdmissionPolicy.uniform(1.01), FeatureExtractor(), T0)
    assert decision.outcome is Outcome.REJECTED and after is store


def test_scoring_failure_is_logged_as_rejected_with_error():
    conv = make_conversation(["I love jazz.", "I work at Acme."])

    def flaky(text):
        if "Acme" in text:
            raise RuntimeError("model crashed")
        return "9"

    ex = FeatureExtractor(utility=UtilityScorer(StubUtilityProvider(flaky)))
    cands = [make_candidate("Ana loves jazz.", cid="a", turns=(0,)),
             make_candidate("Ben works at Acme.", cid="b", turns=(1,), speaker="Ben", event_time=T0 + 60)]
    store, decisions = process_conversation(conv, AdmissionPolicy.uniform(0.1), MemoryStore(), ex, candidates=cands)
    assert decisions[0].outcome is Outcome.ADMITTED
    assert decisions[1].outcome is Outcome.REJECTED and decisions[1].features is None
    assert decisions[1].error.startswith("utility")
    assert len(store) == 1


def test_store_and_log_round_trip(tmp_path):
    cfg, rec, policy = _golden()
    store, decisions = process_conversation(rec.conversation, policy, MemoryStore(), cfg.build_extractor(),
                                            candidates=candidates_for(rec))
    write_store(store, tmp_path / "s.jsonl")
    write_decisions(decisions, tmp_path / "d.jsonl")
    assert read_store(tmp_path / "s.jsonl") == store
    assert read_decisions(tmp_path / "d.jsonl") == decisions
    write_store(read_store(tmp_path / "s.jsonl"), tmp_path / "s2.jsonl")
    assert (tmp_path / "s.jsonl").read_bytes() == (tmp_path / "s2.jsonl").read_bytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 10)), min_size=1, max_size=12),
       st.sampled_from([0.2, 0.4, 0.5, 0.6]))
def test_store_accounting(items, theta):
    # texts drawn from a small pool so duplicates and near-duplicates occur
    pool = ["Ana loves jazz", "Ana loves cool jazz", "Ana works at Acme", "Ana works at Initech",
            "Ana is tired", "Ana lives in Rome"]
    texts = [pool[i] for i, _ in items]
    ratings = {}
    for (i, r) in items:
        ratings.setdefault(pool[i], str(r))
    conv = make_conversation(texts, speakers=("Ana",), step=0)
    cands = [make_candidate(t, cid=f"c{k}", turns=(k,)) for k, t in enumerate(texts)]
    vecs = {pool[0]: [1, 0, 0, 0], pool[1]: [0.9, 0.43, 0, 0], pool[2]: [0, 0, 1, 0], pool[3]: [0, 0, 0.9, 0.43],
            pool[4]: [0, 1, 0, 0], pool[5]: [0, 0, 0, 1]}
    ex = FeatureExtractor(utility=UtilityScorer(StubUtilityProvider(ratings)), embedder=LookupEmbedder(vecs))
    store, decisions = process_conversation(conv, AdmissionPolicy.uniform(theta), MemoryStore(), ex, candidates=cands)
    admitted = sum(d.outcome is Outcome.ADMITTED for d in decisions)
    updated = sum(d.outcome is Outcome.UPDATED for d in decisions)
    assert len(store) == admitted
    assert sum(e.merge_count for e in store) == updated
    for d in decisions:
        assert (d.outcome is Outcome.REJECTED) == (d.score < theta)
    provenance = [p for e in store for p in e.provenance]
    assert len(provenance) == len(set(provenance)) == admitted + updated
