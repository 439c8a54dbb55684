"""Coalition-game scoring engine.

A game is a set of players plus a value oracle over coalitions (subsets of
players).  The engine computes exact Shapley and Banzhaf values with
arbitrary-precision rational arithmetic, and a seeded Monte Carlo Shapley
estimate for games too large to enumerate.
"""
from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Hashable, Mapping

Player = Hashable
Coalition = frozenset

#: Default cap on the number of distinct coalition evaluations an exact
#: computation may require; exceeding it raises instead of truncating.
DEFAULT_BUDGET = 2**25


class GameError(Exception):
    """Base class for game-engine failures."""


class PlayerNotInGameError(GameError):
    pass


class BudgetExceededError(GameError):
    """Exact enumeration would exceed the evaluation budget.

    Callers are expected to fall back to `shapley_monte_carlo`.
    """


@dataclass(frozen=True)
class Game:
    """Players plus a total, deterministic coalition-value oracle.

    The oracle must be defined on every subset of `players`, including the
    empty coalition (which is always evaluated, never assumed to be 0).
    Players are kept in ascending order so batch output is deterministic.
    `concurrency_safe` declares whether the oracle tolerates concurrent
    calls; the engine itself is pure.
    """

    players: tuple
    value: Callable[[Coalition], Fraction | int | float]
    concurrency_safe: bool = True

    def __post_init__(self):
        ordered = tuple(sorted(self.players))
        if len(set(ordered)) != len(ordered):
            raise ValueError("player ids must be unique")
        object.__setattr__(self, "players", ordered)

    @classmethod
    def from_table(cls, table: Mapping[Coalition, Fraction | int | float]) -> "Game":
        """Build a game from an explicit coalition -> value table."""
        players: set = set()
        for coalition in table:
            players.update(coalition)
        values = {frozenset(k): v for k, v in table.items()}

        def value(s: Coalition):
            return values[frozenset(s)]

        return cls(players=tuple(players), value=value)


@dataclass(frozen=True)
class ScoreResult:
    """A per-player score with its computation mode.

    Exact mode carries a reduced rational; Monte Carlo mode carries a float
    together with the (epsilon, delta, seed, samples) it was produced with.
    """

    player: Player
    value: Fraction | float
    mode: str  # "exact" | "monte_carlo"
    epsilon: float | None = None
    delta: float | None = None
    seed: int | None = None
    samples: int | None = None


def sample_count(epsilon: float, delta: float) -> int:
    """Hoeffding sample size for an additive (epsilon, delta) guarantee on
    [0, 1]-bounded marginal contributions: ceil(ln(2/delta) / (2 eps^2))."""
    _check_epsilon_delta(epsilon, delta)
    return math.ceil(math.log(2.0 / delta) / (2.0 * epsilon * epsilon))


def shapley_exact(game: Game, player: Player, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Exact Shapley value of `player`.

    Sums over all coalitions S not containing the player, weighting the
    marginal contribution G(S + player) - G(S) by |S|! (n-|S|-1)! / n!,
    with exact integer factorials and rational arithmetic throughout.
    """
    _check_player(game, player)
    _check_budget(game, budget)
    return _shapley_one(game, player, _memoized(game))


def banzhaf_exact(game: Game, player: Player, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Exact Banzhaf index: the average marginal contribution of `player`
    over all 2^(n-1) coalitions of the other players."""
    _check_player(game, player)
    _check_budget(game, budget)
    return _banzhaf_one(game, player, _memoized(game))


def shapley_all(game: Game, budget: int = DEFAULT_BUDGET) -> dict:
    """Exact Shapley values for every player, sharing one coalition-value
    memo so each subset is evaluated at most once."""
    _check_budget(game, budget)
    value = _memoized(game)
    return {p: _shapley_one(game, p, value) for p in game.players}


def banzhaf_all(game: Game, budget: int = DEFAULT_BUDGET) -> dict:
    """Exact Banzhaf indices for every player (shared memo, as above)."""
    _check_budget(game, budget)
    value = _memoized(game)
    return {p: _banzhaf_one(game, p, value) for p in game.players}


def shapley_monte_carlo(
    game: Game,
    player: Player,
    epsilon: float,
    delta: float,
    seed: int,
) -> ScoreResult:
    """Monte Carlo Shapley estimate from uniformly random player orders.

    Averages the marginal contribution of `player` over `sample_count(
    epsilon, delta)` sampled permutations.  For games whose marginals lie in
    [0, 1] (monotone 0/1 games in particular) the estimate is within
    epsilon of the exact value with probability at least 1 - delta.

    Each sample's permutation is drawn from an RNG derived from (seed,
    sample index), so results are reproducible and independent of how the
    sample range might be partitioned across workers.
    """
    _check_player(game, player)
    m = sample_count(epsilon, delta)
    value = _memoized(game)
    players = list(game.players)
    total = Fraction(0)
    for index in range(m):
        rng = random.Random(_derived_seed(seed, index))
        order = players[:]
        rng.shuffle(order)
        before = frozenset(order[: order.index(player)])
        total += value(before | {player}) - value(before)
    return ScoreResult(
        player=player,
        value=float(total / m),
        mode="monte_carlo",
        epsilon=epsilon,
        delta=delta,
        seed=seed,
        samples=m,
    )


def _shapley_one(game: Game, player: Player, value) -> Fraction:
    n = len(game.players)
    others = [p for p in game.players if p != player]
    factorial = math.factorial
    total = Fraction(0)
    for size in range(n):
        weight = Fraction(factorial(size) * factorial(n - size - 1), factorial(n))
        for chosen in combinations(others, size):
            coalition = frozenset(chosen)
            total += weight * (value(coalition | {player}) - value(coalition))
    return total


def _banzhaf_one(game: Game, player: Player, value) -> Fraction:
    n = len(game.players)
    others = [p for p in game.players if p != player]
    total = Fraction(0)
    for size in range(n):
        for chosen in combinations(others, size):
            coalition = frozenset(chosen)
            total += value(coalition | {player}) - value(coalition)
    return Fraction(total, 2 ** (n - 1))


def _memoized(game: Game) -> Callable[[Coalition], Fraction]:
    # Write-once cache; safe because the oracle is deterministic by contract.
    cache: dict[Coalition, Fraction] = {}

    def value(coalition: Coalition) -> Fraction:
        key = frozenset(coalition)
        got = cache.get(key)
        if got is None:
            got = Fraction(game.value(key))
            cache[key] = got
        return got

    return value


def _derived_seed(seed: int, index: int) -> int:
    # hash() is randomized per process; use a stable digest instead.
    digest = hashlib.sha256(f"{seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def _check_player(game: Game, player: Player) -> None:
    if player not in game.players:
        raise PlayerNotInGameError(f"player {player!r} is not in the game")


def _check_budget(game: Game, budget: int) -> None:
    needed = 2 ** len(game.players)
    if needed > budget:
        raise BudgetExceededError(
            f"exact enumeration needs {needed} coalition evaluations, "
            f"budget is {budget}; use shapley_monte_carlo instead"
        )


def _check_epsilon_delta(epsilon: float, delta: float) -> None:
    if not (epsilon > 0.0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0, 1), got {delta}")
