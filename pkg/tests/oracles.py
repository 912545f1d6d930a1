"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction


def brute_force_grid(step: float, dims: int = 5) -> set[tuple[Fraction, ...]]:
    n = round(1 / step)
    return {tuple(Fraction(k, n) for k in combo)
            for combo in itertools.product(range(n + 1), repeat=dims) if sum(combo) == n}


def grouped_folds(conv_ids, k, seed):
    ids = sorted(set(conv_ids))
    random.Random(seed).shuffle(ids)
    return {cid: i % k for i, cid in enumerate(ids)}


def _prf(pred, gold):
    tp = sum(p and g for p, g in zip(pred, gold))
    fp = sum(p and not g for p, g in zip(pred, gold))
    fn = sum(g and not p for p, g in zip(pred, gold))
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else Fraction(0)
    return prec, f1


def exhaustive_learn(examples, weight_step, thetas, folds, seed):
    """Exact-arithmetic grid search with the documented tie-break.

    ``examples`` are (features tuple, label, conversation_id). Returns
    (weights as floats, theta, mean F1 as Fraction).
    """
    fold_of = grouped_folds([c for _, _, c in examples], folds, seed)
    feats = [tuple(Fraction(str(x)) for x in f) for f, _, _ in examples]
    best = None
    for w in sorted(brute_force_grid(weight_step)):
        scores = [sum(wi * fi for wi, fi in zip(w, f)) for f in feats]
        for theta in thetas:
            t = Fraction(str(theta))
            f1s, precs = [], []
            for k in range(folds):
                idx = [i for i, (_, _, c) in enumerate(examples) if fold_of[c] == k]
                p, f1 = _prf([scores[i] >= t for i in idx], [examples[i][1] for i in idx])
                f1s.append(f1)
                precs.append(p)
            key = (-sum(f1s) / folds, -sum(precs) / folds, t, w)
            if best is None or key < best[0]:
                best = (key, w, theta)
    key, w, theta = best
    return tuple(float(x) for x in w), theta, -key[0]
