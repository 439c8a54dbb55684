import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_truth_table, resp_by_exhaustion, shapley_by_permutations
from xscore import mlscores
from xscore.classify import (
    EmpiricalDistribution,
    Entity,
    FeatureSpace,
    FunctionClassifier,
    UniformDistribution,
    ZeroMassEventError,
    all_entities,
)
from xscore.mlscores import (
    ExplanationRequest,
    LabelMismatchError,
    ZeroMassSkipWarning,
    counter,
    resp,
    score_all,
    shap,
)


def uniform_request(space, classifier, entity, **kwargs) -> ExplanationRequest:
    return ExplanationRequest(
        entity=entity,
        classifier=classifier,
        distribution=UniformDistribution(space),
        **kwargs,
    )


@pytest.fixture
def ex6_request(ex6_space, ex6_classifier, ex6_e1):
    return uniform_request(ex6_space, ex6_classifier, ex6_e1)


def dictator_request(width=3):
    space = FeatureSpace(tuple(f"F{i + 1}" for i in range(width)))
    clf = FunctionClassifier(width, lambda e: e.bits[0])
    entity = Entity((1,) * width)
    return uniform_request(space, clf, entity)


# ---------------------------------------------------------------------------
# SHAP


def test_shap_constant_classifier(ex6_space, ex6_e1):
    clf = FunctionClassifier(3, lambda e: 1)
    request = uniform_request(ex6_space, clf, ex6_e1)
    for name in ex6_space.names:
        assert shap(request, name).value == 0


def test_shap_dictator():
    request = dictator_request()
    assert shap(request, "F1").value == Fraction(1, 2)
    assert shap(request, "F2").value == 0
    assert shap(request, "F3").value == 0


def test_shap_golden_truth_table(ex6_request):
    values = {name: shap(ex6_request, name).value for name in ("F1", "F2", "F3")}
    assert values == {
        "F1": Fraction(-1, 24),
        "F2": Fraction(11, 24),
        "F3": Fraction(-1, 24),
    }
    # efficiency: the scores sum to L(e1) - E(L) = 1 - 5/8
    assert sum(values.values()) == Fraction(3, 8)


def test_shap_matches_permutation_oracle(ex6_request):
    game = mlscores._shap_game(ex6_request)
    for name in ("F1", "F2", "F3"):
        assert shap(ex6_request, name).value == shapley_by_permutations(game, name)


@given(st.integers(0, 10**9))
@settings(max_examples=25, deadline=None)
def test_shap_efficiency_uniform_random(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 5)
    space, clf = random_truth_table(rng, width)
    entity = Entity(tuple(rng.randint(0, 1) for _ in range(width)))
    request = uniform_request(space, clf, entity)
    total = sum(shap(request, n).value for n in space.names)
    mean = Fraction(sum(clf.label(e) for e in all_entities(width)), 2**width)
    assert total == clf.label(entity) - mean


@given(st.integers(0, 10**9))
@settings(max_examples=25, deadline=None)
def test_shap_efficiency_empirical_random(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 5)
    space, clf = random_truth_table(rng, width)
    population = list(all_entities(width))
    sample = rng.sample(population, rng.randint(1, len(population)))
    entity = rng.choice(sample)  # positive mass on every conditioning event
    dist = EmpiricalDistribution(space, sample)
    request = ExplanationRequest(entity=entity, classifier=clf, distribution=dist)
    total = sum(shap(request, n).value for n in space.names)
    mean = Fraction(sum(clf.label(e) for e in sample), len(sample))
    assert total == clf.label(entity) - mean


def test_shap_zero_mass_error_and_skip(ex6_space, ex6_classifier):
    # the scored entity is outside the sample, so the fully fixed event
    # (among others) carries no mass
    dist = EmpiricalDistribution(ex6_space, [Entity.from_bits("111")])
    entity = Entity.from_bits("000")
    failing = ExplanationRequest(entity=entity, classifier=ex6_classifier, distribution=dist)
    with pytest.raises(ZeroMassEventError):
        shap(failing, "F1")
    skipping = ExplanationRequest(
        entity=entity, classifier=ex6_classifier, distribution=dist, skip_zero_mass=True
    )
    with pytest.warns(ZeroMassSkipWarning):
        score = shap(skipping, "F1")
    assert isinstance(score.value, Fraction)


# ---------------------------------------------------------------------------
# COUNTER


def test_counter_golden(ex6_request):
    # entities agreeing with e1 off F2 are e1 itself (label 1) and 001 (label 0)
    assert counter(ex6_request, "F2").value == Fraction(1, 2)
    assert counter(ex6_request, "F1").value == 0
    assert counter(ex6_request, "F3").value == 0


def test_counter_constant_classifier(ex6_space, ex6_e1):
    clf = FunctionClassifier(3, lambda e: 1)
    request = uniform_request(ex6_space, clf, ex6_e1)
    for name in ex6_space.names:
        assert counter(request, name).value == 0


@given(st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_counter_two_point_identity(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 5)
    space, clf = random_truth_table(rng, width)
    request = uniform_request(
        space, clf, Entity(tuple(rng.randint(0, 1) for _ in range(width)))
    )
    for i, name in enumerate(space.names):
        expected = Fraction(
            clf.label(request.entity) - clf.label(request.entity.flip(i)), 2
        )
        assert counter(request, name).value == expected


def test_counter_zero_mass(ex6_space, ex6_classifier):
    dist = EmpiricalDistribution(ex6_space, [Entity.from_bits("111")])
    request = ExplanationRequest(
        entity=Entity.from_bits("000"), classifier=ex6_classifier, distribution=dist
    )
    with pytest.raises(ZeroMassEventError):
        counter(request, "F1")


# ---------------------------------------------------------------------------
# RESP


def test_resp_golden_counterfactual(ex6_request):
    score = resp(ex6_request, "F2")
    assert score.value == 1
    assert score.explanation_kind == "counterfactual"
    assert score.witness.contingency == ()
    assert str(score.witness.entity) == "001"  # the single-flip witness


def test_resp_golden_actual(ex6_request):
    score = resp(ex6_request, "F1")
    assert score.value == Fraction(1, 2)
    assert score.explanation_kind == "actual"
    assert score.witness.contingency == ("F2",)
    assert score.witness.contingency_values == (0,)
    assert score.witness.replacement == 1
    assert str(score.witness.entity) == "101"  # flip F1 and F2 together


def test_resp_third_feature_matches_exhaustive_oracle(
    ex6_request, ex6_space, ex6_classifier, ex6_e1
):
    score = resp(ex6_request, "F3")
    assert score.value == resp_by_exhaustion(ex6_classifier, ex6_space, ex6_e1, "F3")
    assert score.value == Fraction(1, 2)
    assert score.witness.contingency == ("F2",)


def test_resp_rejects_wrong_label(ex6_space, ex6_classifier):
    request = uniform_request(ex6_space, ex6_classifier, Entity.from_bits("001"))
    with pytest.raises(LabelMismatchError):
        resp(request, "F1")


def test_resp_explains_label_zero_when_asked(ex6_space, ex6_classifier):
    request = uniform_request(
        ex6_space, ex6_classifier, Entity.from_bits("001"), target_label=0
    )
    score = resp(request, "F2")  # 001 -> 011 flips the label to 1
    assert score.value == 1
    assert score.explanation_kind == "counterfactual"


def test_resp_no_explanation_is_zero(ex6_space, ex6_e1):
    clf = FunctionClassifier(3, lambda e: 1)
    request = uniform_request(ex6_space, clf, ex6_e1)
    score = resp(request, "F1")
    assert score.value == 0
    assert score.explanation_kind == "none"
    assert score.witness is None


def test_resp_contingency_cap(ex6_request, ex6_space, ex6_classifier, ex6_e1):
    capped = ExplanationRequest(
        entity=ex6_e1,
        classifier=ex6_classifier,
        distribution=UniformDistribution(ex6_space),
        max_contingency=0,
    )
    assert resp(capped, "F2").value == 1  # counterfactual still found
    assert resp(capped, "F1").value == 0  # needs |Y| = 1, above the cap


@given(st.integers(0, 10**9))
@settings(max_examples=30, deadline=None)
def test_resp_matches_exhaustive_oracle_random(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 4)
    space, clf = random_truth_table(rng, width)
    ones = [e for e in all_entities(width) if clf.label(e) == 1]
    if not ones:
        return
    entity = rng.choice(ones)
    request = uniform_request(space, clf, entity)
    for name in space.names:
        score = resp(request, name)
        assert score.value == resp_by_exhaustion(clf, space, entity, name)
        if score.explanation_kind != "none":
            # the value is pinned to the witness contingency size
            assert score.value == Fraction(1, 1 + len(score.witness.contingency))
            assert clf.label(score.witness.entity) == 0
        else:
            assert score.value == 0 and score.witness is None


@given(st.integers(0, 10**9))
@settings(max_examples=30, deadline=None)
def test_single_flip_counter_forces_resp_one(seed):
    rng = random.Random(seed)
    width = rng.randint(1, 4)
    space, clf = random_truth_table(rng, width)
    ones = [e for e in all_entities(width) if clf.label(e) == 1]
    if not ones:
        return
    entity = rng.choice(ones)
    request = uniform_request(space, clf, entity)
    for i, name in enumerate(space.names):
        full_swing = clf.label(entity) - clf.label(entity.flip(i)) == 1
        score = resp(request, name)
        if full_swing:
            assert score.value == 1
            assert score.explanation_kind == "counterfactual"
        assert (score.value == 1) == (score.explanation_kind == "counterfactual")


def test_resp_witness_is_lexicographically_least():
    # both F2 and F3 can serve as size-1 contingencies for F1; F2 wins
    space = FeatureSpace(("F1", "F2", "F3"))
    clf = FunctionClassifier(3, lambda e: 0 if sum(e.bits) >= 2 else 1)
    request = uniform_request(space, clf, Entity((0, 0, 0)))
    score = resp(request, "F1")
    assert score.witness.contingency == ("F2",)
    assert score.witness.contingency_values == (1,)


# ---------------------------------------------------------------------------
# Batch scoring and order invariance


def test_score_all_resp_ranking(ex6_request):
    scores = score_all(ex6_request, ["resp"])
    assert [(s.feature, s.value) for s in scores] == [
        ("F2", Fraction(1)),
        ("F1", Fraction(1, 2)),
        ("F3", Fraction(1, 2)),
    ]


def test_score_all_constant_classifier_name_order(ex6_space, ex6_e1):
    clf = FunctionClassifier(3, lambda e: 1)
    request = uniform_request(ex6_space, clf, ex6_e1)
    scores = score_all(request, ["shap", "counter"])
    assert [s.kind for s in scores] == ["counter"] * 3 + ["shap"] * 3
    assert [s.feature for s in scores] == ["F1", "F2", "F3"] * 2
    assert all(s.value == 0 for s in scores)


def test_score_all_dictator_ranks_dictator_first():
    request = dictator_request()
    scores = score_all(request, ["shap", "counter"])
    by_kind = {}
    for s in scores:
        by_kind.setdefault(s.kind, []).append(s.feature)
    assert by_kind["shap"][0] == "F1"
    assert by_kind["counter"][0] == "F1"


def test_score_all_batch_matches_single_calls(ex6_request):
    batch = {(s.kind, s.feature): s.value for s in score_all(ex6_request, ["shap", "resp"])}
    for name in ("F1", "F2", "F3"):
        assert batch[("shap", name)] == shap(ex6_request, name).value
        assert batch[("resp", name)] == resp(ex6_request, name).value


def test_score_all_rejects_unknown_kind(ex6_request):
    with pytest.raises(ValueError, match="unknown score kind"):
        score_all(ex6_request, ["resp", "magic"])


def test_scores_invariant_under_feature_declaration_order(ex6_classifier):
    # same classifier logic, features declared in reverse
    forward = FeatureSpace(("F1", "F2", "F3"))
    backward = FeatureSpace(("F3", "F2", "F1"))
    reversed_clf = FunctionClassifier(
        3, lambda e: ex6_classifier.label(Entity(tuple(reversed(e.bits))))
    )
    fwd_request = uniform_request(forward, ex6_classifier, Entity((0, 1, 1)))
    bwd_request = uniform_request(backward, reversed_clf, Entity((1, 1, 0)))
    for name in ("F1", "F2", "F3"):
        assert shap(fwd_request, name).value == shap(bwd_request, name).value
        assert counter(fwd_request, name).value == counter(bwd_request, name).value
        assert resp(fwd_request, name).value == resp(bwd_request, name).value


def test_request_width_validation(ex6_classifier, ex6_space):
    with pytest.raises(ValueError):
        ExplanationRequest(
            entity=Entity.from_bits("01"),
            classifier=ex6_classifier,
            distribution=UniformDistribution(ex6_space),
        )
