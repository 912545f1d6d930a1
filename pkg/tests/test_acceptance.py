"""Acceptance suite: twelve criteria, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v`` (the summary block is
printed at the end of the session) or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import random
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from memadmit.admission import MemoryStore, process_conversation
from memadmit.cli import main
from memadmit.config import EngineConfig
from memadmit.core import FEATURE_NAMES, CandidateMemory, compute_metrics, f1_from_pr, metrics_from_counts
from memadmit.evalharness import ExperimentPlan, prepare, run_ablation, run_benchmark, run_latency
from memadmit.policy import TABLE3_THETAS, GridConfig, LabeledExample, enumerate_weight_grid, learn_policy, threshold_sweep
from memadmit.scorers import FeatureExtractor, HashingEmbedder, StubUtilityProvider, UtilityScorer
from memadmit.scorers.features import RecencyParams, score_novelty, score_recency
from memadmit.scorers.text import rouge_l
from memadmit.synthetic import bundled_corpus_path

sys.path.insert(0, str(Path(__file__).parent))
from conftest import FIXTURES, T0, make_candidate, make_conversation  # noqa: E402
from oracles import brute_force_grid, exhaustive_learn  # noqa: E402

RESULTS: list[str] = []


@contextmanager
def criterion(number: int, title: str, limit_s: float):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < limit_s, f"runtime {elapsed:.2f}s exceeds {limit_s}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        line = f"FAIL  {number:>2}. {title} ({elapsed:.2f}s / {limit_s}s): {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
        RESULTS.append(line)
        print(line)
        raise
    line = f"PASS  {number:>2}. {title} ({elapsed:.2f}s / {limit_s}s)"
    RESULTS.append(line)
    print(line)


def _lcs_dp(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i][j] = table[i - 1][j - 1] + 1 if a[i - 1] == b[j - 1] else max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


def _rouge_oracle(a, b):
    if not a or not b:
        return 0.0
    lcs = _lcs_dp(a, b)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(a), lcs / len(b)
    return 2 * p * r / (p + r)


def _cos(u, v):
    dot = sum(x * y for x, y in zip(u, v))
    return dot / (math.sqrt(sum(x * x for x in u)) * math.sqrt(sum(y * y for y in v)))


class _Matrix:
    def __init__(self, m):
        self.m = m

    def embedding_matrix(self):
        return self.m


def test_01_metric_arithmetic():
    with criterion(1, "metric arithmetic matches reported F1 values", 1):
        assert abs(f1_from_pr(0.410, 0.944) - 0.571) <= 0.001
        assert round(f1_from_pr(0.278, 0.278), 3) == 0.278
        # The same path through counts: P = R = 5/18 gives F1 = 5/18.
        m = metrics_from_counts(5, 13, 13, 69)
        assert abs(m.f1 - 5 / 18) < 1e-12 and round(m.f1, 3) == 0.278
        assert compute_metrics([True, True, False], [True, False, True]).f1 == pytest.approx(0.5)


def test_02_recency_half_life():
    with criterion(2, "recency at 69.31 h equals 0.5", 1):
        cand = make_candidate("Ana loves jazz", event_time=T0)
        value = score_recency(cand, RecencyParams(now=T0 + 69.31 * 3600, lam=0.01))
        assert abs(value - 0.5) <= 1e-4


def test_03_rouge_l_oracle():
    with criterion(3, "ROUGE-L equals the LCS dynamic-programming oracle on 1000 pairs", 10):
        rng = random.Random(3)
        vocab = [f"w{i}" for i in range(12)]
        for _ in range(1000):
            a = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
            b = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
            assert rouge_l(a, b) == _rouge_oracle(a, b), (a, b)


def test_04_novelty_oracle():
    with criterion(4, "novelty equals 1 - brute-force max cosine (200 candidates)", 10):
        rng = random.Random(4)
        emb = HashingEmbedder(64)
        words = "jazz tea rome acme dog cat piano tired loves works lives sister hiking sushi".split()
        for i in range(200):
            cand = make_candidate(" ".join(rng.choices(words, k=rng.randint(2, 7))), cid=f"n{i}")
            texts = [" ".join(rng.choices(words, k=rng.randint(2, 7))) for _ in range(rng.randint(0, 50))]
            matrix = emb.embed(texts)
            got = score_novelty(cand, _Matrix(matrix), emb)
            if not texts:
                assert got == 1.0
                continue
            vec = emb.embed([cand.text])[0].tolist()
            best = max(max(_cos(vec, row) for row in matrix.tolist()), 0.0)
            assert abs(got - (1.0 - best)) <= 1e-9
        assert score_novelty(make_candidate("x y"), _Matrix(np.zeros((0, 64))), emb) == 1.0


def test_05_grid_correctness():
    with criterion(5, "weight grids have 1001 and 15 simplex points matching brute force", 5):
        for step, size in ((0.1, 1001), (0.5, 15)):
            grid = enumerate_weight_grid(step)
            n = round(1 / step)
            assert len(grid) == size == len(brute_force_grid(step))
            assert {tuple(round(x * n) for x in w) for w in grid} == {
                tuple(int(x * n) for x in w) for w in brute_force_grid(step)}
            assert all(abs(sum(w) - 1.0) <= 1e-9 and min(w) >= 0.0 for w in grid)


def test_06_learner_oracle():
    with criterion(6, "learner equals exhaustive enumeration on the coarse grid", 5):
        rng = random.Random(6)
        examples = [
            LabeledExample(f"e{i}", _features(rng), rng.random() < 0.5, f"conv{i % 5}") for i in range(20)
        ]
        grid = GridConfig(weight_step=0.5, theta_min=0.3, theta_max=0.6, theta_step=0.1, folds=5, seed=0)
        got = learn_policy(examples, grid).best_policy
        w, theta, _ = exhaustive_learn(
            [(e.features.as_tuple(), e.gold_label, e.conversation_id) for e in examples], 0.5, grid.thetas(), 5, 0)
        assert (got.weights, got.threshold) == (w, theta)


def _features(rng):
    from memadmit.core import FeatureVector

    return FeatureVector(*(round(rng.random(), 1) for _ in range(5)))


def test_07_planted_signal_recovery(tmp_path):
    with criterion(7, "synthetic corpus: w_T maximal, test F1 >= 0.85, Type Prior ablation drop >= 0.15", 60):
        plan = ExperimentPlan(str(bundled_corpus_path()), str(tmp_path))
        extractor = EngineConfig().build_extractor()
        prepared = prepare(plan, extractor)
        report = run_benchmark(plan, extractor, prepared=prepared)
        weights = report.policy.weights
        t = FEATURE_NAMES.index("type_prior")
        assert weights[t] == max(weights), weights
        f1 = next(r for r in report.rows if r.method == "A-MAC").metrics.f1
        assert f1 >= 0.85, f"test F1 {f1:.3f}"
        drop = next(r for r in run_ablation(plan, extractor, prepared=prepared) if r.feature == "type_prior").delta_f1
        assert drop <= -0.15, f"Type Prior ablation delta {drop:.3f}"


def test_08_threshold_monotonicity():
    with criterion(8, "sweep admitted count and recall non-increasing in theta", 10):
        rng = random.Random(8)
        for trial in range(50):
            examples = [LabeledExample(f"e{i}", _features(rng), rng.random() < 0.4, "c") for i in range(100)]
            weights = random.Random(trial).choice(enumerate_weight_grid(0.1))
            rows = threshold_sweep(examples, weights, TABLE3_THETAS)
            assert [r.theta for r in rows] == list(TABLE3_THETAS)
            for a, b in zip(rows, rows[1:]):
                assert b.admitted <= a.admitted and b.recall <= a.recall


def test_09_golden_trace(tmp_path):
    with criterion(9, "decision log matches the hand-executed golden trace byte for byte", 5):
        log = tmp_path / "decisions.jsonl"
        code = main([
            "--config", str(FIXTURES / "golden_config.yaml"), "admit",
            str(FIXTURES / "golden_conversation.jsonl"), str(FIXTURES / "golden_policy.json"),
            str(tmp_path / "store.jsonl"), "--log", str(log),
        ])
        assert code == 0
        assert log.read_bytes() == (FIXTURES / "golden_trace.jsonl").read_bytes()


def test_10_call_economy():
    with criterion(10, "100 candidates with 40 duplicates cost at most 60 utility calls", 30):
        texts = [f"Ana owns {n} vintage item number {n}" for n in range(60)]
        conv = make_conversation(texts, speakers=("Ana",))
        cands = [CandidateMemory(f"u{i}", t, (i,), "Ana", T0 + i * 60, None, "c1") for i, t in enumerate(texts)]
        rng = random.Random(10)
        for j in range(40):
            i = rng.randrange(60)
            cands.append(CandidateMemory(f"d{j}", texts[i], (i,), "Ana", T0 + i * 60, None, "c1"))
        stub = StubUtilityProvider()
        extractor = FeatureExtractor(utility=UtilityScorer(stub), embedder=HashingEmbedder())
        from memadmit.core import AdmissionPolicy

        _, decisions = process_conversation(conv, AdmissionPolicy.uniform(0.5), MemoryStore(), extractor,
                                            candidates=cands)
        assert len(decisions) == 100
        assert stub.calls <= 60, f"{stub.calls} provider calls"


def test_11_latency_structure(tmp_path):
    with criterion(11, "100 ms stub delay: utility > 60% of total, recency median < 5 ms", 60):
        plan = ExperimentPlan(str(bundled_corpus_path()), str(tmp_path))
        extractor = EngineConfig().with_overrides(**{"provider.stub_delay_ms": 100}).build_extractor()
        report = run_latency(plan, extractor, 30)
        assert report.row("utility").percent > 60.0, report.row("utility")
        assert report.row("recency").median_ms < 5.0, report.row("recency")


def test_12_bench_determinism(tmp_path):
    with criterion(12, "bench twice gives byte-identical CSV and manifest", 120):
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            assert main(["--seed", "7", "bench", str(bundled_corpus_path()), "--out", str(out)]) == 0
            outputs.append({name: (out / name).read_bytes() for name in ("benchmark.csv", "manifest.json", "policy.json")})
        assert outputs[0] == outputs[1]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
