import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from memadmit.core import (
    AdmissionDecision,
    AdmissionPolicy,
    Conversation,
    Domain,
    FeatureVector,
    InputError,
    Outcome,
    aggregate_score,
    check_simplex,
    compute_metrics,
    metrics_from_counts,
)

from conftest import make_turn

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_policy_rejects_off_simplex_weights():
    with pytest.raises(InputError):
        AdmissionPolicy((0.5, 0.5, 0.5, 0.0, 0.0), 0.5)
    with pytest.raises(InputError):
        AdmissionPolicy((1.2, -0.2, 0.0, 0.0, 0.0), 0.5)
    with pytest.raises(InputError):
        AdmissionPolicy((0.25, 0.25, 0.25, 0.25), 0.5)


def test_policy_threshold_must_be_finite_and_non_negative():
    with pytest.raises(InputError):
        AdmissionPolicy.uniform(-0.1)
    with pytest.raises(InputError):
        AdmissionPolicy.uniform(math.nan)
    assert AdmissionPolicy.uniform(1.01).threshold == 1.01


def test_feature_vector_range_checked():
    with pytest.raises(InputError):
        FeatureVector(1.1, 0, 0, 0, 0)
    with pytest.raises(InputError):
        FeatureVector(math.nan, 0, 0, 0, 0)


def test_admission_at_threshold_is_inclusive():
    fv = FeatureVector(0.5, 0.5, 0.5, 0.5, 0.5)
    policy = AdmissionPolicy.uniform(0.5)
    assert aggregate_score(fv, policy) == 0.5
    assert policy.admits(aggregate_score(fv, policy))


def test_score_rounding_makes_equal_sums_compare_equal():
    # 0.45*1 + 0.1*1 is 0.55000000000000004 in naive float arithmetic
    fv = FeatureVector(1.0, 1.0, 0.0, 0.0, 0.0)
    policy = AdmissionPolicy((0.45, 0.1, 0.45, 0.0, 0.0), 0.55)
    assert policy.admits(aggregate_score(fv, policy))


@given(st.lists(unit, min_size=5, max_size=5), st.lists(st.integers(0, 20), min_size=5, max_size=5))
def test_score_bounded_by_min_and_max_feature(feats, raw_w):
    total = sum(raw_w)
    if total == 0:
        raw_w, total = [1, 0, 0, 0, 0], 1
    w = [x / total for x in raw_w]
    w[-1] = 1.0 - sum(w[:-1])
    if w[-1] < 0:
        w[-1] = 0.0
    if not check_simplex(w):
        return
    s = aggregate_score(FeatureVector(*feats), AdmissionPolicy(tuple(w), 0.5))
    assert min(feats) - 1e-9 <= s <= max(feats) + 1e-9


def test_metric_conventions_for_empty_denominators():
    m = metrics_from_counts(0, 0, 5, 5)
    assert (m.precision, m.recall, m.f1, m.admitted) == (0.0, 0.0, 0.0, 0)
    m = metrics_from_counts(0, 0, 0, 3)
    assert m.f1 == 0.0


def test_compute_metrics_counts():
    m = compute_metrics([True, True, False, False], [True, False, True, False])
    assert (m.true_pos, m.false_pos, m.false_neg, m.true_neg) == (1, 1, 1, 1)
    assert m.precision == m.recall == m.f1 == 0.5
    with pytest.raises(InputError):
        compute_metrics([True], [True, False])
    with pytest.raises(InputError):
        compute_metrics([], [])


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_f1_is_harmonic_mean(pairs):
    d, y = zip(*pairs)
    m = compute_metrics(list(d), list(y))
    if m.precision + m.recall:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
    assert 0.0 <= m.f1 <= 1.0
    assert m.total == len(pairs)


def test_conversation_validation():
    with pytest.raises(InputError):
        Conversation("c", (make_turn(1, "a"), make_turn(1, "b")))
    with pytest.raises(InputError):
        Conversation("c", (make_turn(0, "a", ts=10), make_turn(1, "b", ts=5)))
    with pytest.raises(InputError):
        Conversation("c", ())
    conv = Conversation("c", (make_turn(0, "a", ts=1), make_turn(2, "b", ts=3)))
    assert [t.turn_id for t in conv.history_through(1)] == [0]
    assert conv.final_timestamp == 3


def test_domain_parse():
    assert Domain.parse(None) is Domain.OTHER
    assert Domain.parse("Personal") is Domain.PERSONAL
    with pytest.raises(InputError):
        Domain.parse("sports")


def test_decision_round_trip_and_updated_requires_conflict():
    d = AdmissionDecision("c", Outcome.ADMITTED, 0.7, FeatureVector(1, 1, 1, 1, 1), "m-1")
    assert AdmissionDecision.from_dict(d.to_dict()) == d
    with pytest.raises(InputError):
        AdmissionDecision("c", Outcome.UPDATED, 0.7, None)
