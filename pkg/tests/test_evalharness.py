import csv
import random
import statistics

import pytest

from memadmit.config import EngineConfig
from memadmit.core import AdmissionPolicy, Domain, FeatureVector, InputError, compute_metrics
from memadmit.evalharness import (
    METHOD_AMAC,
    ExperimentPlan,
    domain_report,
    latency_report,
    prepare,
    run_ablation,
    run_benchmark,
    run_domain_eval,
    run_latency,
    run_sweep,
    split_conversations,
)
from memadmit.policy import TABLE3_THETAS, LabeledExample


@pytest.fixture(scope="module")
def corpus_run(tmp_path_factory, ):
    from memadmit.synthetic import bundled_corpus_path

    out = tmp_path_factory.mktemp("bench")
    plan = ExperimentPlan(str(bundled_corpus_path()), str(out))
    extractor = EngineConfig().build_extractor()
    prepared = prepare(plan, extractor)
    return plan, extractor, prepared


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_split_is_pure_and_disjoint():
    ids = [f"c{i}" for i in range(40)]
    a = split_conversations(ids, "h", 1)
    assert a == split_conversations(list(reversed(ids)), "h", 1)
    assert a != split_conversations(ids, "h", 2)
    assert [len(a[s]) for s in ("train", "val", "test")] == [28, 6, 6]
    assert set().union(*a.values()) == set(ids)
    with pytest.raises(InputError):
        split_conversations(["a", "b"], "h", 0)


def test_features_frozen_once_for_all_splits(corpus_run):
    _, _, prepared = corpus_run
    n = sum(len(prepared.examples(s)) for s in ("train", "val", "test"))
    assert n == len(prepared.frozen.examples) == len(prepared.frozen.timings)


def test_benchmark_shape_and_learning_helps(corpus_run):
    plan, extractor, prepared = corpus_run
    report = run_benchmark(plan, extractor, prepared=prepared)
    rows = _rows(f"{plan.output_dir}/benchmark.csv")
    assert len(rows) == len(report.rows) == 1 + len(plan.baselines)
    f1 = {r["method"]: float(r["f1"]) for r in rows}
    assert f1[METHOD_AMAC] >= f1["EqualWeights"]
    assert [float(r["f1"]) for r in rows] == sorted(f1.values(), reverse=True)
    assert all(r["latency_ms"] == "" for r in rows)  # offline modes leave latency blank


def test_random_row_is_reproducible(corpus_run, tmp_path):
    plan, extractor, prepared = corpus_run
    rows = []
    for sub in ("a", "b"):
        p = ExperimentPlan(plan.dataset_path, str(tmp_path / sub))
        run_benchmark(p, extractor, prepared=prepared)
        rows.append([r for r in _rows(tmp_path / sub / "benchmark.csv") if r["method"] == "Random"])
    assert rows[0] == rows[1]


def test_benchmark_metrics_match_independent_count(corpus_run):
    plan, extractor, prepared = corpus_run
    report = run_benchmark(plan, extractor, prepared=prepared)
    test = prepared.examples("test")
    w, theta = report.policy.weights, report.policy.threshold
    pred = [sum(a * b for a, b in zip(w, e.features.as_tuple())) >= theta - 1e-12 for e in test]
    tp = sum(p and e.gold_label for p, e in zip(pred, test))
    amac = next(r for r in report.rows if r.method == METHOD_AMAC).metrics
    assert amac.true_pos == tp and amac.admitted == sum(pred)


def test_ablation_shape(corpus_run):
    plan, extractor, prepared = corpus_run
    rows = run_ablation(plan, extractor, prepared=prepared)
    csv_rows = _rows(f"{plan.output_dir}/ablation.csv")
    assert len(rows) == len(csv_rows) == 6 and csv_rows[0]["feature_removed"] == "full"
    for r in rows[1:]:
        assert r.policy.weights[("utility", "confidence", "novelty", "recency", "type_prior").index(r.feature)] == 0


def test_sweep_monotone_on_corpus(corpus_run):
    plan, extractor, prepared = corpus_run
    rows = run_sweep(plan, extractor, prepared=prepared)
    assert [r.theta for r in rows] == list(TABLE3_THETAS)
    assert all(b.admitted <= a.admitted and b.recall <= a.recall for a, b in zip(rows, rows[1:]))


def test_latency_percentages_and_short_input(tmp_path):
    from memadmit.synthetic import bundled_corpus_path

    plan = ExperimentPlan(str(bundled_corpus_path()), str(tmp_path), provider_mode="heuristic")
    cfg = EngineConfig().with_overrides(**{"provider.mode": "heuristic"})
    report = run_latency(plan, cfg.build_extractor(), 30)
    parts = [r.percent for r in report.rows if r.component != "total"]
    assert abs(sum(parts) - 100.0) <= 0.5
    assert report.n_candidates == 30
    # Advisory: rule-only recency is a single exp() call.
    assert report.row("recency").median_ms < 1.0
    with pytest.raises(InputError):
        run_latency(plan, cfg.build_extractor(), 10)


@pytest.mark.slow
def test_injected_delay_dominates(tmp_path):
    from memadmit.synthetic import bundled_corpus_path

    plan = ExperimentPlan(str(bundled_corpus_path()), str(tmp_path))
    extractor = EngineConfig().with_overrides(**{"provider.stub_delay_ms": 100}).build_extractor()
    report = run_latency(plan, extractor, 30)
    assert report.row("utility").percent > 60.0


def test_latency_report_arithmetic():
    names = ("utility", "confidence", "novelty", "recency", "type_prior")
    timings = [dict(zip(names, (0.003, 0.001, 0.0, 0.0, 0.0))), dict(zip(names, (0.001, 0.001, 0.0, 0.0, 0.0)))]
    rep = latency_report(timings)
    assert rep.row("utility").percent == pytest.approx(200 / 3)
    assert rep.row("total").mean_ms == pytest.approx(3.0)


def _domain_examples(counts, seed=0):
    rng = random.Random(seed)
    out = []
    for domain, n in counts.items():
        for i in range(n):
            t = rng.random()
            label = rng.random() < (0.85 if t > 0.5 else 0.15)
            out.append(LabeledExample(f"{domain.value}{i}", FeatureVector(0, 0, 0, 0, t), label, f"c{i}", domain))
    return out


POLICY_T = AdmissionPolicy((0, 0, 0, 0, 1.0), 0.5)


def test_symmetric_domains_have_small_delta():
    rep = domain_report(_domain_examples({Domain.PERSONAL: 2000, Domain.PROFESSIONAL: 2000}), POLICY_T)
    assert all(abs(r.delta_from_mean) <= 0.05 for r in rep.rows)


def test_domain_aggregates_match_definitions():
    ex = _domain_examples({Domain.PERSONAL: 127, Domain.PROFESSIONAL: 98}, seed=4)
    rep = domain_report(ex, POLICY_T)
    assert [r.samples for r in rep.rows] == [127, 98]
    f1s = [r.f1 for r in rep.rows]
    assert rep.std_population == pytest.approx(statistics.pstdev(f1s))
    assert rep.std_sample == pytest.approx(statistics.stdev(f1s))
    assert rep.weighted_f1 == pytest.approx((127 * f1s[0] + 98 * f1s[1]) / 225)
    pooled = compute_metrics([e.features.type_prior >= 0.5 for e in ex], [e.gold_label for e in ex])
    assert rep.micro_f1 == pytest.approx(pooled.f1)


def test_count_weighted_equals_overall_when_domains_match():
    # Identical confusion proportions per domain (127 and 98 scaled copies of one block).
    block = [(0.9, True)] * 3 + [(0.9, False)] + [(0.1, True)]
    ex = []
    for domain, reps in ((Domain.PERSONAL, 127), (Domain.PROFESSIONAL, 98)):
        for k in range(reps):
            for j, (t, y) in enumerate(block):
                ex.append(LabeledExample(f"{domain.value}{k}-{j}", FeatureVector(0, 0, 0, 0, t), y, "c", domain))
    rep = domain_report(ex, POLICY_T)
    assert [r.samples for r in rep.rows] == [635, 490]
    assert rep.weighted_f1 == pytest.approx(rep.micro_f1, abs=1e-12)


def test_count_weighted_can_differ_from_overall():
    # F1 is not additive across subsets, so the two aggregates are reported separately.
    ex = [LabeledExample("a", FeatureVector(0, 0, 0, 0, 0.9), True, "c", Domain.PERSONAL),
          LabeledExample("b", FeatureVector(0, 0, 0, 0, 0.9), False, "c", Domain.PROFESSIONAL),
          LabeledExample("c", FeatureVector(0, 0, 0, 0, 0.1), True, "c", Domain.PROFESSIONAL)]
    rep = domain_report(ex, POLICY_T)
    assert rep.weighted_f1 == pytest.approx(1 / 3)
    assert rep.micro_f1 == pytest.approx(0.5)  # tp=1, fp=1, fn=1


def test_single_domain_rejected():
    with pytest.raises(InputError):
        domain_report(_domain_examples({Domain.PERSONAL: 20}), POLICY_T)


def test_domain_eval_writes_summary_rows(corpus_run):
    plan, extractor, prepared = corpus_run
    run_domain_eval(plan, extractor, prepared=prepared)
    names = [r["domain"] for r in _rows(f"{plan.output_dir}/domains.csv")]
    assert names[-5:] == ["macro_mean", "micro_overall", "count_weighted_mean", "std_population", "std_sample"]
