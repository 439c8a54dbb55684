"""Explanation scores for tuples in a database, given a Boolean query.

Four scores are computed over the same instance: causal responsibility
(via minimum contingency sets), the interventional causal effect on the
query lineage under an independent tuple-probability model, and the
Shapley / Banzhaf values of the query coalition game.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Mapping

from . import formula, games
from .games import BudgetExceededError, Game
from .reldb import (
    ConjunctiveQuery,
    Database,
    Lineage,
    answers,
    compile_lineage,
    evaluate,
)

__all__ = [
    "CauseReport",
    "TupleScore",
    "NothingToExplainError",
    "NonNumericValueError",
    "VacuousInterventionWarning",
    "causes",
    "lineage_causes",
    "responsibility",
    "intervene",
    "lineage_probability",
    "causal_effect",
    "query_game",
    "lineage_game",
    "summation_game",
    "shapley_tuple",
    "banzhaf_tuple",
]

#: Cap on 2^|support| valuations enumerated for exact lineage probabilities.
DEFAULT_VALUATION_BUDGET = 2**20

HALF = Fraction(1, 2)


class NothingToExplainError(ValueError):
    """The query is false in the database, so no tuple explains an answer."""


class NonNumericValueError(ValueError):
    pass


class VacuousInterventionWarning(UserWarning):
    """Emitted when an intervention targets a tuple the lineage never mentions."""


@dataclass(frozen=True)
class CauseReport:
    """Causal status of one tuple for a true query.

    A counterfactual cause flips the query by its sole removal; an actual
    cause needs a contingency set removed first.  `witness_contingency` is
    the lexicographically least contingency of minimum size, and
    responsibility is 1 / (1 + that size), or 0 for non-causes.
    """

    tuple_id: str
    is_actual_cause: bool
    is_counterfactual_cause: bool
    min_contingency_size: int | None
    witness_contingency: tuple[str, ...] | None
    responsibility: Fraction


@dataclass(frozen=True)
class TupleScore:
    tuple_id: str
    kind: str  # "responsibility" | "causal_effect" | "shapley" | "banzhaf"
    value: Fraction | float
    mode: str = "exact"
    epsilon: float | None = None
    delta: float | None = None
    seed: int | None = None


# ---------------------------------------------------------------------------
# Actual causes and responsibility


def causes(db: Database, query: ConjunctiveQuery) -> list[CauseReport]:
    """Causal report for every tuple of `db` (zero scores included).

    Requires the query to be true in `db`.  The contingency search runs
    over the lineage support only; tuples outside every disjunct cannot
    affect the query and are reported as non-causes directly.
    """
    if not evaluate(db, query):
        raise NothingToExplainError("query is false in the database")
    return lineage_causes(compile_lineage(db, query), db.tuple_ids())


def lineage_causes(lineage: Lineage, tuple_ids: Iterable[str] | None = None) -> list[CauseReport]:
    """Causal reports computed directly from a lineage formula.

    `tuple_ids` defaults to the lineage support; pass the full instance's
    ids to also report the (zero) scores of unmentioned tuples.
    """
    support = sorted(lineage.support())
    if not lineage.evaluate(support):
        raise NothingToExplainError("lineage is false even with every tuple present")
    players = sorted(set(tuple_ids)) if tuple_ids is not None else support
    truth = _memoized_truth(lineage)
    return [_cause_of(lineage, support, tid, truth) for tid in players]


def responsibility(db: Database, query: ConjunctiveQuery, tuple_id: str) -> Fraction:
    """Responsibility of one tuple: 1 / (1 + minimum contingency size)."""
    db.values_of(tuple_id)
    if not evaluate(db, query):
        raise NothingToExplainError("query is false in the database")
    lineage = compile_lineage(db, query)
    report = _cause_of(lineage, sorted(lineage.support()), tuple_id)
    return report.responsibility


def _cause_of(lineage: Lineage, support: list[str], tuple_id: str, truth=None) -> CauseReport:
    # Breadth-first over contingency sizes; the first hit is minimal, and
    # combinations() of the sorted support yields the lexicographic least.
    if tuple_id not in lineage.support():
        return CauseReport(tuple_id, False, False, None, None, Fraction(0))
    if truth is None:
        truth = _memoized_truth(lineage)
    rest = [t for t in support if t != tuple_id]
    everything = frozenset(support)
    for size in range(len(rest) + 1):
        for gamma in combinations(rest, size):
            present = everything.difference(gamma)
            if truth(present) and not truth(present - {tuple_id}):
                return CauseReport(
                    tuple_id=tuple_id,
                    is_actual_cause=True,
                    is_counterfactual_cause=size == 0,
                    min_contingency_size=size,
                    witness_contingency=gamma,
                    responsibility=Fraction(1, size + 1),
                )
    return CauseReport(tuple_id, False, False, None, None, Fraction(0))


def _memoized_truth(lineage: Lineage):
    # Shared across the per-tuple searches of one batch; all writers would
    # compute identical values, so plain dict caching is safe.
    cache: dict[frozenset, bool] = {}

    def truth(present: frozenset) -> bool:
        got = cache.get(present)
        if got is None:
            got = cache[present] = lineage.evaluate(present)
        return got

    return truth


# ---------------------------------------------------------------------------
# Interventions and the causal-effect score


def intervene(lineage: Lineage, tuple_id: str, value: int) -> Lineage:
    """Force one tuple variable to a constant and constant-propagate.

    Interventions on tuples the formula never mentions are allowed but
    flagged with `VacuousInterventionWarning`.
    """
    if value not in (0, 1):
        raise ValueError(f"intervention value must be 0 or 1, got {value!r}")
    if not lineage.mentions(tuple_id):
        warnings.warn(
            f"intervention on {tuple_id!r} is vacuous: the lineage does not mention it",
            VacuousInterventionWarning,
            stacklevel=2,
        )
        return lineage
    root = formula.substitute(lineage.root, {tuple_id: bool(value)})
    return Lineage(root=root, source=lineage.source)


def lineage_probability(
    lineage: Lineage,
    probabilities: Mapping[str, Fraction] | Fraction | None = None,
    budget: int = DEFAULT_VALUATION_BUDGET,
) -> Fraction:
    """Probability that the lineage is true under independent tuple variables.

    Each tuple is present with its own probability (default 1/2 for all).
    Computed exactly by enumerating every valuation of the support.
    """
    support = sorted(lineage.support())
    prob = _probability_table(support, probabilities)
    if 2 ** len(support) > budget:
        raise BudgetExceededError(
            f"lineage support of {len(support)} needs {2 ** len(support)} valuations, budget is {budget}"
        )
    total = Fraction(0)
    for bits in product((False, True), repeat=len(support)):
        present = frozenset(t for t, bit in zip(support, bits) if bit)
        if lineage.evaluate(present):
            weight = Fraction(1)
            for t, bit in zip(support, bits):
                weight *= prob[t] if bit else 1 - prob[t]
            total += weight
    return total


def causal_effect(
    source: Lineage | Database,
    tuple_id: str,
    query: ConjunctiveQuery | None = None,
    probabilities: Mapping[str, Fraction] | Fraction | None = None,
    budget: int = DEFAULT_VALUATION_BUDGET,
) -> Fraction:
    """Expected query value under do(X=1) minus under do(X=0).

    Accepts a lineage directly, or a database together with `query`.
    Tuples the lineage never mentions have identical intervened formulas,
    hence effect 0.
    """
    if isinstance(source, Database):
        if query is None:
            raise ValueError("a query is required when scoring a database")
        lineage = compile_lineage(source, query)
    else:
        lineage = source
    if not lineage.mentions(tuple_id):
        return Fraction(0)
    p_on = lineage_probability(intervene(lineage, tuple_id, 1), probabilities, budget)
    p_off = lineage_probability(intervene(lineage, tuple_id, 0), probabilities, budget)
    return p_on - p_off


# ---------------------------------------------------------------------------
# Coalition games over database tuples


def query_game(db: Database, query: ConjunctiveQuery) -> Game:
    """The 0/1 game whose players are all tuples of `db` and whose value on
    a coalition S is whether the query holds in the sub-instance S."""
    if not query.is_boolean:
        raise ValueError("query games need a Boolean query (empty head)")
    evaluate(db, query)  # surface schema errors before play begins

    def value(coalition):
        return 1 if evaluate(db.restrict(coalition), query) else 0

    return Game(players=db.tuple_ids(), value=value)


def lineage_game(lineage: Lineage) -> Game:
    """The 0/1 game over the lineage support; a coalition wins when the
    formula is true with exactly that coalition present."""

    def value(coalition):
        return 1 if lineage.evaluate(coalition) else 0

    return Game(players=tuple(sorted(lineage.support())), value=value)


def summation_game(db: Database, query: ConjunctiveQuery, value_var: str | None = None) -> Game:
    """Aggregation game: the value of a coalition S is the sum, over the
    distinct answers of the query on sub-instance S, of the designated
    numeric output variable (default: the last head variable)."""
    if query.is_boolean:
        raise ValueError("summation needs a query with output variables in the head")
    head_names = [v.name for v in query.head]
    if value_var is None:
        value_var = head_names[-1]
    if value_var not in head_names:
        raise ValueError(f"value variable {value_var!r} is not in the query head")
    position = head_names.index(value_var)
    evaluate(db, query)

    def value(coalition):
        total = Fraction(0)
        for answer in answers(db.restrict(coalition), query):
            total += _numeric(answer[position])
        return total

    return Game(players=db.tuple_ids(), value=value)


def shapley_tuple(
    db: Database,
    query: ConjunctiveQuery,
    tuple_id: str,
    mode: str = "exact",
    epsilon: float | None = None,
    delta: float | None = None,
    seed: int | None = None,
    budget: int = games.DEFAULT_BUDGET,
) -> TupleScore:
    """Shapley value of one tuple in the query game, exact or sampled."""
    game = query_game(db, query)
    if mode == "exact":
        value = games.shapley_exact(game, tuple_id, budget=budget)
        return TupleScore(tuple_id=tuple_id, kind="shapley", value=value)
    if mode == "monte_carlo":
        if epsilon is None or delta is None or seed is None:
            raise ValueError("monte_carlo mode needs epsilon, delta and seed")
        result = games.shapley_monte_carlo(game, tuple_id, epsilon, delta, seed)
        return TupleScore(
            tuple_id=tuple_id,
            kind="shapley",
            value=result.value,
            mode="monte_carlo",
            epsilon=epsilon,
            delta=delta,
            seed=seed,
        )
    raise ValueError(f"unknown mode {mode!r}")


def banzhaf_tuple(
    db: Database,
    query: ConjunctiveQuery,
    tuple_id: str,
    budget: int = games.DEFAULT_BUDGET,
) -> TupleScore:
    """Banzhaf index of one tuple in the query game (always exact)."""
    value = games.banzhaf_exact(query_game(db, query), tuple_id, budget=budget)
    return TupleScore(tuple_id=tuple_id, kind="banzhaf", value=value)


def _probability_table(
    support: list[str],
    probabilities: Mapping[str, Fraction] | Fraction | None,
) -> dict[str, Fraction]:
    if probabilities is None:
        return {t: HALF for t in support}
    if isinstance(probabilities, (Fraction, int)):
        shared = Fraction(probabilities)
        _check_probability(shared)
        return {t: shared for t in support}
    table = {}
    for t in support:
        p = Fraction(probabilities.get(t, HALF))
        _check_probability(p)
        table[t] = p
    return table


def _check_probability(p: Fraction) -> None:
    if not 0 <= p <= 1:
        raise ValueError(f"tuple probability {p} outside [0, 1]")


def _numeric(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise NonNumericValueError(f"attribute value {text!r} is not numeric") from exc
