import random
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    min_contingency_unrestricted,
    random_database_for,
    random_sjf_query,
    shapley_by_permutations,
)
from xscore import games, reldb
from xscore.dbscores import (
    NonNumericValueError,
    NothingToExplainError,
    VacuousInterventionWarning,
    banzhaf_tuple,
    causal_effect,
    causes,
    intervene,
    lineage_causes,
    lineage_game,
    lineage_probability,
    query_game,
    responsibility,
    shapley_tuple,
    summation_game,
)
from xscore.games import BudgetExceededError
from xscore.reldb import Database, compile_lineage, parse_lineage, parse_query


# ---------------------------------------------------------------------------
# Actual causes and responsibility


EX1_RESPONSIBILITY = {
    "S(b)": Fraction(1),
    "R(a,b)": Fraction(1, 2),
    "R(b,b)": Fraction(1, 2),
    "S(a)": Fraction(1, 2),
    "R(c,d)": Fraction(0),
    "S(c)": Fraction(0),
}


def test_causes_golden(ex1_db, ex1_query):
    reports = {r.tuple_id: r for r in causes(ex1_db, ex1_query)}
    assert set(reports) == set(ex1_db.tuple_ids())

    pivot = reports["S(b)"]
    assert pivot.is_counterfactual_cause and pivot.is_actual_cause
    assert pivot.min_contingency_size == 0
    assert pivot.witness_contingency == ()
    assert pivot.responsibility == 1

    ab = reports["R(a,b)"]
    assert ab.is_actual_cause and not ab.is_counterfactual_cause
    assert ab.min_contingency_size == 1
    assert ab.witness_contingency == ("R(b,b)",)
    assert ab.responsibility == Fraction(1, 2)

    for tid, expected in EX1_RESPONSIBILITY.items():
        assert reports[tid].responsibility == expected

    for tid in ("R(c,d)", "S(c)"):
        report = reports[tid]
        assert not report.is_actual_cause
        assert report.min_contingency_size is None
        assert report.witness_contingency is None


def test_responsibility_projection(ex1_db, ex1_query):
    assert responsibility(ex1_db, ex1_query, "S(b)") == 1
    assert responsibility(ex1_db, ex1_query, "R(b,b)") == Fraction(1, 2)
    assert responsibility(ex1_db, ex1_query, "S(a)") == Fraction(1, 2)
    assert responsibility(ex1_db, ex1_query, "R(c,d)") == 0


def test_causes_requires_true_query(ex1_db):
    with pytest.raises(NothingToExplainError):
        causes(ex1_db, parse_query('Q() :- R(x, "nope")'))


def test_lineage_causes_defaults_to_support(path_lineage):
    reports = lineage_causes(path_lineage)
    assert [r.tuple_id for r in reports] == ["t1", "t2", "t3", "t4", "t5", "t6"]
    # every edge lies on some a-to-b path, and flipping the query needs the
    # two other paths broken first: responsibility is 1/3 across the board
    for report in reports:
        assert report.is_actual_cause and not report.is_counterfactual_cause
        assert report.min_contingency_size == 2
        assert report.responsibility == Fraction(1, 3)
    by_id = {r.tuple_id: r for r in reports}
    assert by_id["t1"].witness_contingency == ("t2", "t4")


def test_support_restriction_matches_unrestricted_search(ex1_db, ex1_query):
    for report in causes(ex1_db, ex1_query):
        direct = min_contingency_unrestricted(ex1_db, ex1_query, report.tuple_id)
        assert report.min_contingency_size == direct


# ---------------------------------------------------------------------------
# Interventions and lineage probability


def test_intervene_worked_example(ce_db, ce_query):
    lineage = compile_lineage(ce_db, ce_query)
    assert str(intervene(lineage, "S(b)", 0)) == "R(a,c) & S(c)"
    assert str(intervene(lineage, "S(b)", 1)) == "R(a,b) | (R(a,c) & S(c)) | R(c,b)"


def test_intervene_single_literal_to_false():
    db = Database.from_dict({"R": [("a",)]})
    lineage = parse_lineage("R:0", db)
    assert str(intervene(lineage, "R:0", 0)) == "false"
    assert str(intervene(lineage, "R:0", 1)) == "true"


def test_intervene_vacuous_warns(path_db, path_lineage):
    db = path_db
    db.add("E", ("z", "z"), tuple_id="t7")
    lineage = parse_lineage("t1 | (t2 & t3)", db)
    with pytest.warns(VacuousInterventionWarning):
        out = intervene(lineage, "t7", 0)
    assert str(out) == str(lineage)


def test_intervene_rejects_non_bit(path_lineage):
    with pytest.raises(ValueError):
        intervene(path_lineage, "t1", 2)


def test_lineage_probability_worked_example(ce_db, ce_query):
    lineage = compile_lineage(ce_db, ce_query)
    assert lineage_probability(intervene(lineage, "S(b)", 0)) == Fraction(1, 4)
    assert lineage_probability(intervene(lineage, "S(b)", 1)) == Fraction(13, 16)


def test_lineage_probability_constants(path_db):
    lineage = parse_lineage("t1", path_db)
    assert lineage_probability(intervene(lineage, "t1", 1)) == 1
    assert lineage_probability(intervene(lineage, "t1", 0)) == 0
    assert lineage_probability(lineage, probabilities=Fraction(1, 3)) == Fraction(1, 3)


def test_lineage_probability_per_tuple_table(path_db):
    lineage = parse_lineage("t1 | t2", path_db)
    p = {"t1": Fraction(1, 2), "t2": Fraction(1, 4)}
    assert lineage_probability(lineage, probabilities=p) == Fraction(5, 8)


def test_lineage_probability_budget(path_lineage):
    with pytest.raises(BudgetExceededError):
        lineage_probability(path_lineage, budget=32)  # needs 2^6


def test_lineage_probability_rejects_bad_probability(path_db):
    lineage = parse_lineage("t1", path_db)
    with pytest.raises(ValueError):
        lineage_probability(lineage, probabilities=Fraction(3, 2))


def test_causal_effect_worked_example(ce_db, ce_query):
    assert causal_effect(ce_db, "S(b)", query=ce_query) == Fraction(9, 16)


def test_causal_effect_path_lineage(path_lineage):
    expected = {
        "t1": Fraction(21, 32),
        "t2": Fraction(7, 32),
        "t3": Fraction(7, 32),
        "t4": Fraction(3, 32),
        "t5": Fraction(3, 32),
        "t6": Fraction(3, 32),
    }
    for tid, value in expected.items():
        assert causal_effect(path_lineage, tid) == value
    assert float(expected["t1"]) == 0.65625
    assert float(expected["t2"]) == 0.21875
    assert float(expected["t4"]) == 0.09375


def test_causal_effect_absent_tuple_is_zero(ex1_db, ex1_query):
    with warnings.catch_warnings():
        warnings.simplefilter("error")  # must not warn either
        assert causal_effect(ex1_db, "R(c,d)", query=ex1_query) == 0


def test_causal_effect_requires_query_with_database(ex1_db):
    with pytest.raises(ValueError, match="query"):
        causal_effect(ex1_db, "S(b)")


# ---------------------------------------------------------------------------
# Query games


def test_query_game_values(ex1_db, ex1_query):
    game = query_game(ex1_db, ex1_query)
    assert game.players == tuple(sorted(ex1_db.tuple_ids()))
    assert game.value(frozenset()) == 0
    assert game.value(frozenset(ex1_db.tuple_ids())) == 1
    assert game.value(frozenset({"R(a,b)", "S(a)", "S(b)"})) == 1
    assert game.value(frozenset({"R(a,b)", "S(a)"})) == 0


def test_query_game_rejects_head_variables(ex1_db):
    with pytest.raises(ValueError):
        query_game(ex1_db, parse_query("Q(x) :- R(x, y)"))


def test_lineage_game_matches_query_game(ce_db, ce_query):
    lineage = compile_lineage(ce_db, ce_query)
    qg = query_game(ce_db, ce_query)
    lg = lineage_game(lineage)
    assert games.shapley_all(qg) == games.shapley_all(lg)


EX1_SHAPLEY = {
    "R(a,b)": Fraction(1, 12),
    "R(b,b)": Fraction(1, 4),
    "R(c,d)": Fraction(0),
    "S(a)": Fraction(1, 12),
    "S(b)": Fraction(7, 12),
    "S(c)": Fraction(0),
}


def test_shapley_tuple_golden(ex1_db, ex1_query):
    game = query_game(ex1_db, ex1_query)
    for tid, expected in EX1_SHAPLEY.items():
        score = shapley_tuple(ex1_db, ex1_query, tid)
        assert score.value == expected
        assert score.value == shapley_by_permutations(game, tid)
    assert sum(EX1_SHAPLEY.values()) == 1  # efficiency: G(D) - G(empty)


def test_shapley_tuple_monte_carlo(ex1_db, ex1_query):
    score = shapley_tuple(
        ex1_db, ex1_query, "S(b)", mode="monte_carlo", epsilon=0.1, delta=0.1, seed=3
    )
    assert score.mode == "monte_carlo"
    assert abs(score.value - float(EX1_SHAPLEY["S(b)"])) <= 0.1
    again = shapley_tuple(
        ex1_db, ex1_query, "S(b)", mode="monte_carlo", epsilon=0.1, delta=0.1, seed=3
    )
    assert score == again
    with pytest.raises(ValueError):
        shapley_tuple(ex1_db, ex1_query, "S(b)", mode="monte_carlo")


def test_banzhaf_equals_causal_effect_worked_example(ce_db, ce_query):
    score = banzhaf_tuple(ce_db, ce_query, "S(b)")
    assert score.value == Fraction(9, 16)
    assert score.value == causal_effect(ce_db, "S(b)", query=ce_query)


@given(st.integers(0, 10**9))
@settings(max_examples=25, deadline=None)
def test_banzhaf_equals_causal_effect_random(seed):
    rng = random.Random(seed)
    query = random_sjf_query(rng)
    db = random_database_for(rng, query)
    lineage = compile_lineage(db, query)
    indices = games.banzhaf_all(query_game(db, query))
    for tid in db.tuple_ids():
        assert indices[tid] == causal_effect(lineage, tid)


@given(st.integers(0, 10**9))
@settings(max_examples=15, deadline=None)
def test_responsibility_shapley_nonzero_agreement(seed):
    rng = random.Random(seed)
    query = random_sjf_query(rng)
    db = random_database_for(rng, query)
    if not reldb.evaluate(db, query):
        return
    values = games.shapley_all(query_game(db, query))
    for report in causes(db, query):
        assert (report.responsibility > 0) == (values[report.tuple_id] > 0)


@given(st.integers(0, 10**9))
@settings(max_examples=15, deadline=None)
def test_counterfactual_implies_positive_effect(seed):
    rng = random.Random(seed)
    query = random_sjf_query(rng)
    db = random_database_for(rng, query)
    if not reldb.evaluate(db, query):
        return
    lineage = compile_lineage(db, query)
    for report in causes(db, query):
        if report.is_counterfactual_cause:
            assert report.responsibility == 1
            assert causal_effect(lineage, report.tuple_id) > 0


def test_scores_invariant_under_insertion_order(ex1_query):
    forward = Database()
    backward = Database()
    rows_r = [("a", "b"), ("c", "d"), ("b", "b")]
    rows_s = [("a",), ("c",), ("b",)]
    for values in rows_r:
        forward.add("R", values, tuple_id=f"R({values[0]},{values[1]})")
    for values in rows_s:
        forward.add("S", values, tuple_id=f"S({values[0]})")
    for values in reversed(rows_s):
        backward.add("S", values, tuple_id=f"S({values[0]})")
    for values in reversed(rows_r):
        backward.add("R", values, tuple_id=f"R({values[0]},{values[1]})")
    assert games.shapley_all(query_game(forward, ex1_query)) == games.shapley_all(
        query_game(backward, ex1_query)
    )
    assert {r.tuple_id: r for r in causes(forward, ex1_query)} == {
        r.tuple_id: r for r in causes(backward, ex1_query)
    }


# ---------------------------------------------------------------------------
# Summation games


def test_summation_game_basics():
    db = Database.from_dict({"R": [("a", "5")]})
    game = summation_game(db, parse_query("Q(x, v) :- R(x, v)"))
    assert game.value(frozenset()) == 0
    assert game.value(frozenset({"R:0"})) == 5


def test_summation_game_explicit_value_var():
    db = Database.from_dict({"R": [("7", "5")]})
    query = parse_query("Q(x, v) :- R(x, v)")
    assert summation_game(db, query, value_var="x").value(frozenset({"R:0"})) == 7
    with pytest.raises(ValueError):
        summation_game(db, query, value_var="w")


def test_summation_game_rejects_boolean_query():
    db = Database.from_dict({"R": [("a", "5")]})
    with pytest.raises(ValueError):
        summation_game(db, parse_query("Q() :- R(x, v)"))


def test_summation_game_non_numeric():
    db = Database.from_dict({"R": [("a", "x5")]})
    game = summation_game(db, parse_query("Q(x, v) :- R(x, v)"))
    with pytest.raises(NonNumericValueError):
        game.value(frozenset({"R:0"}))


def test_summation_shapley_is_linear_in_answers():
    # Join of 4 tuples; the aggregate game's Shapley value must equal the
    # value-weighted sum of the per-answer Boolean games' Shapley values.
    db = Database.from_dict(
        {"R": [("a", "b"), ("a", "c"), ("b", "b")], "W": [("b", "10"), ("c", "3")]}
    )
    query = parse_query("Q(x, y, v) :- R(x, y), W(y, v)")
    aggregate = games.shapley_all(summation_game(db, query))

    weighted: dict[str, Fraction] = {tid: Fraction(0) for tid in db.tuple_ids()}
    for answer in reldb.answers(db, query):
        x, y, v = answer
        single = parse_query(f'Q() :- R("{x}", "{y}"), W("{y}", "{v}")')
        boolean = games.shapley_all(query_game(db, single))
        for tid, value in boolean.items():
            weighted[tid] += Fraction(v) * value
    assert aggregate == weighted
