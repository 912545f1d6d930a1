"""Experiment orchestration: benchmark, ablation, threshold sweep, latency and per-domain reports.

Every experiment follows the same protocol. Parse the dataset, compute the
five features once per labeled candidate ("freeze"), split conversations
70/15/15, learn on the training split and report on the test split. All
methods in one run read the same frozen features.

Frozen novelty is measured against the earlier candidates of the same
conversation, as if every earlier candidate had been stored. This keeps the
features independent of any particular policy.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from memadmit import __version__
from memadmit.baselines import BaselineSpec, default_baselines
from memadmit.core import (
    FEATURE_NAMES,
    AdmissionPolicy,
    ClassificationMetrics,
    Domain,
    InputError,
    compute_metrics,
)
from memadmit.ingest import Dataset, DatasetRecord, candidates_for, parse_dataset
from memadmit.policy import (
    TABLE3_THETAS,
    GridConfig,
    LabeledExample,
    LearnResult,
    SweepRow,
    ablate_feature,
    evaluate_policy,
    learn_policy,
    save_policy,
    threshold_sweep,
)
from memadmit.scorers.features import FeatureExtractor

logger = logging.getLogger(__name__)

METHOD_AMAC = "A-MAC"
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class ExperimentPlan:
    dataset_path: str
    output_dir: str
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    grid: GridConfig = GridConfig()
    baselines: tuple[BaselineSpec, ...] = ()
    provider_mode: str = "stub"
    seed: int = 0
    jobs: int = 1
    config_hash: str = ""

    def __post_init__(self) -> None:
        if len(self.split) != 3 or any(r <= 0 for r in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise InputError(f"split ratios must be three positive numbers summing to 1, got {self.split}")
        if self.jobs < 1:
            raise InputError("jobs must be at least 1")
        if not self.baselines:
            object.__setattr__(self, "baselines", tuple(default_baselines(self.seed)))

    @property
    def record_latency(self) -> bool:
        # Measured milliseconds are not reproducible, so offline modes leave the column blank.
        return self.provider_mode == "remote"


@dataclass(frozen=True)
class FrozenFeatures:
    examples: tuple[LabeledExample, ...]
    timings: tuple[Mapping[str, float], ...]  # seconds per feature, parallel to examples


@dataclass(frozen=True)
class Prepared:
    dataset: Dataset
    frozen: FrozenFeatures
    splits: Mapping[str, frozenset[str]]

    def examples(self, split: str) -> list[LabeledExample]:
        ids = self.splits[split]
        return [e for e in self.frozen.examples if e.conversation_id in ids]

    def timings(self, split: str) -> list[Mapping[str, float]]:
        ids = self.splits[split]
        return [t for e, t in zip(self.frozen.examples, self.frozen.timings) if e.conversation_id in ids]


@dataclass(frozen=True)
class MethodRow:
    method: str
    metrics: ClassificationMetrics
    latency_ms: Optional[float] = None


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[MethodRow, ...]
    learned: LearnResult
    policy: AdmissionPolicy


@dataclass(frozen=True)
class AblationRow:
    feature: str  # "full" for the unablated model
    policy: AdmissionPolicy
    f1: float
    delta_f1: float


@dataclass(frozen=True)
class LatencyRow:
    component: str
    mean_ms: float
    median_ms: float
    p95_ms: float
    percent: float


@dataclass(frozen=True)
class LatencyReport:
    rows: tuple[LatencyRow, ...]
    n_candidates: int

    def row(self, component: str) -> LatencyRow:
        for r in self.rows:
            if r.component == component:
                return r
        raise KeyError(component)


@dataclass(frozen=True)
class DomainRow:
    domain: str
    samples: int
    precision: float
    recall: float
    f1: float
    delta_from_mean: float


@dataclass(frozen=True)
class DomainReport:
    rows: tuple[DomainRow, ...]
    macro_f1: float
    micro_f1: float
    weighted_f1: float
    std_population: float
    std_sample: float


# preparation


def split_conversations(
    conversation_ids: Sequence[str],
    dataset_hash: str,
    seed: int,
    ratios: Sequence[float] = (0.70, 0.15, 0.15),
) -> dict[str, frozenset[str]]:
    """Conversation-level split; a pure function of (ids, dataset hash, seed, ratios)."""
    ids = sorted(set(conversation_ids))
    if len(ids) < 3:
        raise InputError(f"need at least 3 conversations to split, got {len(ids)}")
    digest = hashlib.sha256(f"{dataset_hash}:{seed}".encode("utf-8")).digest()
    random.Random(int.from_bytes(digest[:8], "big")).shuffle(ids)
    n = len(ids)
    n_val = max(1, round(ratios[1] * n))
    n_test = max(1, round(ratios[2] * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise InputError(f"{n} conversations are too few for split {tuple(ratios)}")
    return {
        "train": frozenset(ids[:n_train]),
        "val": frozenset(ids[n_train:n_train + n_val]),
        "test": frozenset(ids[n_train + n_val:]),
    }


class _EmbeddingRows:
    def __init__(self, matrix: np.ndarray):
        self._m = matrix

    def embedding_matrix(self) -> np.ndarray:
        return self._m


def _freeze_record(record: DatasetRecord, extractor: FeatureExtractor) -> list[tuple[LabeledExample, Mapping[str, float]]]:
    conv = record.conversation
    cands = candidates_for(record)
    if not cands:
        return []
    embeddings = extractor.embed([c.text for c in cands])
    now = conv.final_timestamp
    out = []
    for i, cand in enumerate(cands):
        history = conv.history_through(cand.last_source_turn)
        result = extractor.compute(cand, history, _EmbeddingRows(embeddings[:i]), now, embedding=embeddings[i])
        example = LabeledExample(
            candidate_id=cand.candidate_id,
            features=result.features,
            gold_label=bool(cand.gold_label),
            conversation_id=conv.conversation_id,
            domain=conv.domain,
        )
        out.append((example, result.timings))
    return out


def freeze_features(
    records: Sequence[DatasetRecord], extractor: FeatureExtractor, jobs: int = 1
) -> FrozenFeatures:
    """Compute features once per labeled candidate; conversations run in parallel when ``jobs > 1``."""
    labeled = [r for r in records if r.labels is not None]
    if not labeled:
        raise InputError("dataset has no labeled conversations")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="freeze") as pool:
            parts = list(pool.map(lambda r: _freeze_record(r, extractor), labeled))
    else:
        parts = [_freeze_record(r, extractor) for r in labeled]
    pairs = [p for part in parts for p in part]
    return FrozenFeatures(tuple(e for e, _ in pairs), tuple(t for _, t in pairs))


def prepare(plan: ExperimentPlan, extractor: FeatureExtractor) -> Prepared:
    dataset = parse_dataset(plan.dataset_path)
    frozen = freeze_features(dataset.records, extractor, plan.jobs)
    conv_ids = [e.conversation_id for e in frozen.examples]
    splits = split_conversations(conv_ids, dataset.content_hash, plan.seed, plan.split)
    logger.info(
        "froze %d examples; split %s conversations",
        len(frozen.examples),
        "/".join(str(len(splits[s])) for s in SPLIT_NAMES),
    )
    return Prepared(dataset, frozen, splits)


# output helpers


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6f}"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _iso(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(plan: ExperimentPlan, prepared: Prepared, command: str, extra: Mapping[str, object]) -> Path:
    """Add this command's entry to ``manifest.json`` in the output directory.

    Timestamps come from the data, never the wall clock, so reruns are byte-identical.
    """
    stamps = [t.timestamp for r in prepared.dataset.records for t in r.conversation.turns]
    entry = {
        "config_hash": plan.config_hash,
        "dataset": Path(plan.dataset_path).name,
        "dataset_hash": prepared.dataset.content_hash,
        "seed": plan.seed,
        "provider_mode": plan.provider_mode,
        "split_ratios": list(plan.split),
        "split_conversations": {s: len(prepared.splits[s]) for s in SPLIT_NAMES},
        "split_examples": {s: len(prepared.examples(s)) for s in SPLIT_NAMES},
        "timestamps": {"data_start": _iso(min(stamps)), "data_end": _iso(max(stamps))},
        "version": __version__,
        **extra,
    }
    path = Path(plan.output_dir) / "manifest.json"
    doc = {}
    if path.exists():
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            doc = {}
    doc[command] = entry
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _policy_doc(policy: AdmissionPolicy) -> dict:
    return {"weights": dict(zip(FEATURE_NAMES, policy.weights)), "theta": policy.threshold}


def _learn(plan: ExperimentPlan, prepared: Prepared) -> LearnResult:
    return learn_policy(prepared.examples("train"), plan.grid)


# experiments


def _mean_latency_ms(timings: Sequence[Mapping[str, float]], features: Sequence[str]) -> float:
    if not timings or not features:
        return 0.0
    return 1000.0 * statistics.fmean(sum(t[f] for f in features) for t in timings)


def run_benchmark(
    plan: ExperimentPlan,
    extractor: FeatureExtractor,
    policy: Optional[AdmissionPolicy] = None,
    prepared: Optional[Prepared] = None,
) -> BenchmarkReport:
    """A-MAC and every baseline on the same test split; writes ``benchmark.csv``."""
    prepared = prepared or prepare(plan, extractor)
    learned = _learn(plan, prepared)
    policy = policy or learned.best_policy
    test = prepared.examples("test")
    labels = [e.gold_label for e in test]
    timings = prepared.timings("test")

    def latency(features: Sequence[str]) -> Optional[float]:
        return _mean_latency_ms(timings, features) if plan.record_latency else None

    rows = [MethodRow(METHOD_AMAC, evaluate_policy(policy, test), latency(FEATURE_NAMES))]
    for spec in plan.baselines:
        rows.append(MethodRow(spec.name, compute_metrics(spec.decide(test), labels), latency(spec.features_used)))
    rows.sort(key=lambda r: (-r.metrics.f1, r.method))

    out = Path(plan.output_dir)
    _write_csv(
        out / "benchmark.csv",
        ["method", "precision", "recall", "f1", "admitted", "latency_ms"],
        [
            [r.method, _fmt(r.metrics.precision), _fmt(r.metrics.recall), _fmt(r.metrics.f1), r.metrics.admitted,
             _fmt(r.latency_ms)]
            for r in rows
        ],
    )
    save_policy(out / "policy.json", policy, grid=plan.grid, result=learned, dataset_hash=prepared.dataset.content_hash)
    write_manifest(
        plan,
        prepared,
        "bench",
        {
            "policy": _policy_doc(policy),
            "mean_val_f1": learned.mean_val_f1,
            "baselines": [{"name": s.name, "parameters": dict(s.parameters)} for s in plan.baselines],
        },
    )
    return BenchmarkReport(tuple(rows), learned, policy)


def run_ablation(
    plan: ExperimentPlan, extractor: FeatureExtractor, prepared: Optional[Prepared] = None
) -> list[AblationRow]:
    """Full model plus one re-learned model per removed feature; writes ``ablation.csv``."""
    prepared = prepared or prepare(plan, extractor)
    train, test = prepared.examples("train"), prepared.examples("test")
    full = learn_policy(train, plan.grid)
    full_f1 = evaluate_policy(full.best_policy, test).f1
    ablated = []
    for name in FEATURE_NAMES:
        result, delta = ablate_feature(train, test, name, plan.grid, full=full)
        ablated.append(AblationRow(name, result.best_policy, full_f1 + delta, delta))
    ablated.sort(key=lambda r: (r.delta_f1, r.feature))
    rows = [AblationRow("full", full.best_policy, full_f1, 0.0)] + ablated
    _write_csv(
        Path(plan.output_dir) / "ablation.csv",
        ["feature_removed", "f1", "delta_f1", "theta", *(f"w_{n}" for n in FEATURE_NAMES)],
        [[r.feature, _fmt(r.f1), _fmt(r.delta_f1), _fmt(r.policy.threshold), *(_fmt(w) for w in r.policy.weights)]
         for r in rows],
    )
    write_manifest(plan, prepared, "ablate", {"policy": _policy_doc(full.best_policy)})
    return rows


def run_sweep(
    plan: ExperimentPlan,
    extractor: FeatureExtractor,
    thetas: Sequence[float] = TABLE3_THETAS,
    prepared: Optional[Prepared] = None,
) -> list[SweepRow]:
    """Learned weights at each threshold over the training (cross-validation) examples."""
    prepared = prepared or prepare(plan, extractor)
    train = prepared.examples("train")
    learned = learn_policy(train, plan.grid)
    rows = threshold_sweep(train, learned.best_policy.weights, thetas)
    _write_csv(
        Path(plan.output_dir) / "threshold_sweep.csv",
        ["theta", "precision", "recall", "f1", "admitted"],
        [[f"{r.theta:.2f}", _fmt(r.precision), _fmt(r.recall), _fmt(r.f1), r.admitted] for r in rows],
    )
    write_manifest(plan, prepared, "sweep", {"policy": _policy_doc(learned.best_policy)})
    return rows


def latency_report(timings: Sequence[Mapping[str, float]]) -> LatencyReport:
    if not timings:
        raise InputError("no timings to summarize")
    per = {name: np.asarray([t[name] for t in timings]) * 1000.0 for name in FEATURE_NAMES}
    total_mean = sum(float(v.mean()) for v in per.values())
    rows = []
    for name in FEATURE_NAMES:
        v = per[name]
        pct = 100.0 * float(v.mean()) / total_mean if total_mean > 0 else 100.0 / len(FEATURE_NAMES)
        rows.append(LatencyRow(name, float(v.mean()), float(np.median(v)), float(np.percentile(v, 95)), pct))
    totals = np.sum(np.stack(list(per.values())), axis=0)
    rows.append(LatencyRow("total", float(totals.mean()), float(np.median(totals)), float(np.percentile(totals, 95)),
                           100.0))
    return LatencyReport(tuple(rows), len(timings))


def run_latency(
    plan: ExperimentPlan, extractor: FeatureExtractor, n_candidates: int = 30
) -> LatencyReport:
    """Time each feature over the first ``n_candidates`` candidates; writes ``latency.csv``.

    Milliseconds depend on the machine; only shares and orderings are meaningful.
    """
    if n_candidates < 30:
        raise InputError("latency runs need at least 30 candidates for stable medians")
    dataset = parse_dataset(plan.dataset_path)
    timings: list[Mapping[str, float]] = []
    for record in dataset.records:
        conv = record.conversation
        cands = candidates_for(record)[: n_candidates - len(timings)]
        embedded = []
        for cand in cands:
            history = conv.history_through(cand.last_source_turn)
            store = _EmbeddingRows(np.asarray(embedded) if embedded else np.zeros((0, 0)))
            result = extractor.compute(cand, history, store, conv.final_timestamp)
            embedded.append(result.embedding)
            timings.append(result.timings)
        if len(timings) >= n_candidates:
            break
    if len(timings) < n_candidates:
        raise InputError(f"dataset yields only {len(timings)} candidates; {n_candidates} requested")
    report = latency_report(timings)
    _write_csv(
        Path(plan.output_dir) / "latency.csv",
        ["component", "mean_ms", "median_ms", "p95_ms", "percent"],
        [[r.component, f"{r.mean_ms:.3f}", f"{r.median_ms:.3f}", f"{r.p95_ms:.3f}", f"{r.percent:.2f}"]
         for r in report.rows],
    )
    return report


def domain_report(examples: Sequence[LabeledExample], policy: AdmissionPolicy) -> DomainReport:
    """One policy scored per domain, with micro, macro and count-weighted F1 side by side."""
    by_domain: dict[Domain, list[LabeledExample]] = {}
    for e in examples:
        by_domain.setdefault(e.domain, []).append(e)
    if len(by_domain) < 2:
        raise InputError(f"domain evaluation needs at least 2 domains, got {sorted(d.value for d in by_domain)}")
    metrics = {d: evaluate_policy(policy, exs) for d, exs in by_domain.items()}
    f1s = [m.f1 for m in metrics.values()]
    macro = statistics.fmean(f1s)
    n = len(examples)
    rows = tuple(
        DomainRow(d.value, len(by_domain[d]), m.precision, m.recall, m.f1, m.f1 - macro)
        for d, m in sorted(metrics.items(), key=lambda kv: kv[0].value)
    )
    return DomainReport(
        rows=rows,
        macro_f1=macro,
        micro_f1=evaluate_policy(policy, examples).f1,
        weighted_f1=sum(len(by_domain[d]) * m.f1 for d, m in metrics.items()) / n,
        std_population=statistics.pstdev(f1s),
        std_sample=statistics.stdev(f1s),
    )


def run_domain_eval(
    plan: ExperimentPlan,
    extractor: FeatureExtractor,
    policy: Optional[AdmissionPolicy] = None,
    prepared: Optional[Prepared] = None,
) -> DomainReport:
    prepared = prepared or prepare(plan, extractor)
    policy = policy or _learn(plan, prepared).best_policy
    report = domain_report(prepared.examples("test"), policy)
    rows: list[list[object]] = [
        [r.domain, r.samples, _fmt(r.precision), _fmt(r.recall), _fmt(r.f1), _fmt(r.delta_from_mean)]
        for r in report.rows
    ]
    total = sum(r.samples for r in report.rows)
    rows += [
        ["macro_mean", total, "", "", _fmt(report.macro_f1), ""],
        ["micro_overall", total, "", "", _fmt(report.micro_f1), ""],
        ["count_weighted_mean", total, "", "", _fmt(report.weighted_f1), ""],
        ["std_population", "", "", "", _fmt(report.std_population), ""],
        ["std_sample", "", "", "", _fmt(report.std_sample), ""],
    ]
    _write_csv(
        Path(plan.output_dir) / "domains.csv",
        ["domain", "samples", "precision", "recall", "f1", "delta_from_mean"],
        rows,
    )
    write_manifest(plan, prepared, "domains", {"policy": _policy_doc(policy)})
    return report

