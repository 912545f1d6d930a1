"""Policy learning: grid search over simplex weights and thresholds with grouped k-fold CV.

Features are frozen before the search, so each grid point is scored in closed
form on every validation fold and the point with the best mean validation F1
wins. Ties go to higher mean validation precision, then lower threshold, then
the lexicographically smallest weight vector.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from memadmit.core import (
    FEATURE_NAMES,
    SCORE_DECIMALS,
    AdmissionPolicy,
    ClassificationMetrics,
    Domain,
    FeatureVector,
    InputError,
    InvariantViolation,
    aggregate_score,
    compute_metrics,
)

VALID_WEIGHT_STEPS = (0.05, 0.1, 0.2, 0.25, 0.5, 1.0)
TABLE3_THETAS = (0.30, 0.40, 0.50, 0.55, 0.60, 0.65, 0.70)
POLICY_FORMAT = "memadmit-policy/1"


@dataclass(frozen=True)
class LabeledExample:
    candidate_id: str
    features: FeatureVector
    gold_label: bool
    conversation_id: str
    domain: Domain = Domain.OTHER


@dataclass(frozen=True)
class GridConfig:
    weight_step: float = 0.1
    theta_min: float = 0.30
    theta_max: float = 0.60
    theta_step: float = 0.05
    folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        _steps_per_unit(self.weight_step)
        if self.theta_step <= 0 or self.theta_max < self.theta_min:
            raise InputError("threshold range must be non-empty with a positive step")
        span = (self.theta_max - self.theta_min) / self.theta_step
        if abs(span - round(span)) > 1e-9:
            raise InputError("threshold step must divide the threshold range")
        if self.folds < 2:
            raise InputError("need at least 2 folds")

    def thetas(self) -> list[float]:
        n = round((self.theta_max - self.theta_min) / self.theta_step)
        return [round(self.theta_min + i * self.theta_step, SCORE_DECIMALS) for i in range(n + 1)]


@dataclass(frozen=True)
class LearnResult:
    best_policy: AdmissionPolicy
    mean_val_f1: float
    mean_val_precision: float
    per_fold_f1: tuple[float, ...]
    grid_size: int
    runner_up_gap: float


@dataclass(frozen=True)
class SweepRow:
    theta: float
    precision: float
    recall: float
    f1: float
    admitted: int


def _steps_per_unit(step: float) -> int:
    if not any(math.isclose(step, s, rel_tol=0, abs_tol=1e-12) for s in VALID_WEIGHT_STEPS):
        raise InputError(f"weight step must be one of {VALID_WEIGHT_STEPS}, got {step}")
    return round(1.0 / step)


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        out.extend((first,) + rest for rest in _compositions(total - first, parts - 1))
    return out


def enumerate_weight_grid(step: float) -> list[tuple[float, ...]]:
    """All 5-vectors of multiples of ``step`` summing to 1, in lexicographic order."""
    n = _steps_per_unit(step)
    return [tuple(k / n for k in comp) for comp in _compositions(n, len(FEATURE_NAMES))]


def kfold_split(
    examples: Sequence[LabeledExample], k: int, seed: int
) -> list[tuple[list[int], list[int]]]:
    """Conversation-grouped folds; fold sizes differ by at most one conversation."""
    conv_ids = sorted({e.conversation_id for e in examples})
    if len(conv_ids) < k:
        raise InputError(f"need at least {k} conversations for {k}-fold CV, got {len(conv_ids)}")
    random.Random(seed).shuffle(conv_ids)
    fold_of = {cid: i % k for i, cid in enumerate(conv_ids)}
    folds = []
    for f in range(k):
        val = [i for i, e in enumerate(examples) if fold_of[e.conversation_id] == f]
        train = [i for i, e in enumerate(examples) if fold_of[e.conversation_id] != f]
        folds.append((train, val))
    return folds


def evaluate_policy(policy: AdmissionPolicy, examples: Sequence[LabeledExample]) -> ClassificationMetrics:
    if not examples:
        raise InputError("no examples to evaluate")
    preds = [policy.admits(aggregate_score(e.features, policy)) for e in examples]
    return compute_metrics(preds, [e.gold_label for e in examples])


def _feature_matrix(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    feats = np.asarray([e.features.as_tuple() for e in examples], dtype=np.float64)
    labels = np.asarray([e.gold_label for e in examples], dtype=bool)
    return feats, labels


def _fold_stats(scores: np.ndarray, labels: np.ndarray, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """F1 and precision for every (theta, weight) pair: arrays of shape (T, G)."""
    pred = scores[None, :, :] >= thetas[:, None, None]  # T x n x G
    pos = labels[None, :, None]
    tp = np.sum(pred & pos, axis=1).astype(np.float64)
    fp = np.sum(pred & ~pos, axis=1).astype(np.float64)
    fn = np.sum(~pred & pos, axis=1).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return f1, precision


def learn_policy(
    examples: Sequence[LabeledExample],
    grid: GridConfig = GridConfig(),
    *,
    exclude_feature: Optional[str] = None,
) -> LearnResult:
    labels = [e.gold_label for e in examples]
    if not any(labels) or all(labels):
        raise InputError("policy learning needs both admit and reject labels")
    weights = enumerate_weight_grid(grid.weight_step)
    if exclude_feature is not None:
        idx = FEATURE_NAMES.index(exclude_feature)
        weights = [w for w in weights if w[idx] == 0.0]
    W = np.asarray(weights, dtype=np.float64)
    thetas = np.asarray(grid.thetas(), dtype=np.float64)
    feats, y = _feature_matrix(examples)
    scores = np.round(feats @ W.T, SCORE_DECIMALS)  # n x G

    folds = kfold_split(examples, grid.folds, grid.seed)
    f1_sum = np.zeros((len(thetas), len(weights)))
    prec_sum = np.zeros_like(f1_sum)
    fold_f1 = []
    for _, val in folds:
        f1, prec = _fold_stats(scores[val], y[val], thetas)
        f1_sum += f1
        prec_sum += prec
        fold_f1.append(f1)
    mean_f1 = np.round(f1_sum / len(folds), SCORE_DECIMALS)
    mean_prec = np.round(prec_sum / len(folds), SCORE_DECIMALS)

    t_idx, g_idx = np.meshgrid(np.arange(len(thetas)), np.arange(len(weights)), indexing="ij")
    # np.lexsort: last key is primary.
    order = np.lexsort((g_idx.ravel(), t_idx.ravel(), -mean_prec.ravel(), -mean_f1.ravel()))
    best = order[0]
    bt, bg = int(t_idx.ravel()[best]), int(g_idx.ravel()[best])
    runner_up = float(mean_f1.ravel()[order[1]]) if len(order) > 1 else float("nan")

    policy = AdmissionPolicy(tuple(weights[bg]), float(thetas[bt]))
    return LearnResult(
        best_policy=policy,
        mean_val_f1=float(mean_f1[bt, bg]),
        mean_val_precision=float(mean_prec[bt, bg]),
        per_fold_f1=tuple(float(f[bt, bg]) for f in fold_f1),
        grid_size=len(thetas) * len(weights),
        runner_up_gap=float(mean_f1[bt, bg]) - runner_up,
    )


def ablate_feature(
    train: Sequence[LabeledExample],
    test: Sequence[LabeledExample],
    feature_name: str,
    grid: GridConfig = GridConfig(),
    full: Optional[LearnResult] = None,
) -> tuple[LearnResult, float]:
    """Re-learn with ``feature_name`` pinned to weight 0; return (result, test F1 delta)."""
    if feature_name not in FEATURE_NAMES:
        raise InputError(f"unknown feature {feature_name!r}; expected one of {FEATURE_NAMES}")
    if full is None:
        full = learn_policy(train, grid)
    ablated = learn_policy(train, grid, exclude_feature=feature_name)
    delta = evaluate_policy(ablated.best_policy, test).f1 - evaluate_policy(full.best_policy, test).f1
    return ablated, delta


def threshold_sweep(
    examples: Sequence[LabeledExample], weights: Sequence[float], thetas: Sequence[float] = TABLE3_THETAS
) -> list[SweepRow]:
    """One metrics row per threshold. Raises if admitted count or recall ever increases with theta."""
    rows = []
    for theta in sorted(thetas):
        m = evaluate_policy(AdmissionPolicy(tuple(weights), theta), examples)
        rows.append(SweepRow(theta, m.precision, m.recall, m.f1, m.admitted))
    for a, b in zip(rows, rows[1:]):
        if b.admitted > a.admitted or b.recall > a.recall:
            raise InvariantViolation(f"sweep not monotone between theta={a.theta} and theta={b.theta}")
    return rows


def save_policy(
    path: str | Path,
    policy: AdmissionPolicy,
    *,
    grid: Optional[GridConfig] = None,
    result: Optional[LearnResult] = None,
    dataset_hash: str = "",
) -> None:
    doc = {
        "format": POLICY_FORMAT,
        "feature_order": list(FEATURE_NAMES),
        "weights": list(policy.weights),
        "theta": policy.threshold,
        "grid": asdict(grid) if grid is not None else None,
        "mean_val_f1": result.mean_val_f1 if result is not None else None,
        "per_fold_f1": list(result.per_fold_f1) if result is not None else None,
        "dataset_hash": dataset_hash,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> AdmissionPolicy:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read policy file {path}: {exc}") from exc
    if doc.get("feature_order") != list(FEATURE_NAMES):
        raise InputError(
            f"policy feature order {doc.get('feature_order')} does not match engine order {list(FEATURE_NAMES)}"
        )
    try:
        return AdmissionPolicy(tuple(doc["weights"]), float(doc["theta"]))
    except KeyError as exc:
        raise InputError(f"policy file missing field {exc}") from exc
