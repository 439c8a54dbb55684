"""Binary entities, black-box classifiers and entity-space distributions.

Entities are fixed-width bit vectors over a named feature space.  A
classifier is any total function from entities to {0, 1}; it may live
in-process (truth table, Python callable) or behind a child process
speaking a line protocol.  Distributions over the entity space come in
four variants: uniform, empirical (sample-backed), product-of-marginals,
and any of those conditioned on denial-style or general propositional
constraints.
"""
from __future__ import annotations

import csv
import subprocess
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from . import formula
from ._lex import ParseError, TokenStream, tokenize

#: Widths above this refuse full entity-space enumeration; larger spaces
#: need a finite-support (empirical) distribution.
WIDTH_LIMIT = 20

PROTOCOL_HANDSHAKE = "xscore-clf v1"


class ZeroMassEventError(ValueError):
    """A conditioning event has probability 0 under the distribution."""


class InconsistentConstraintError(ValueError):
    """Conditioning on a constraint whose satisfying set has mass 0."""


class ClassifierProtocolError(RuntimeError):
    """The external classifier broke the line protocol."""


class WidthLimitError(ValueError):
    pass


class DuplicateSampleError(ValueError):
    pass


class UnknownFeatureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Feature spaces and entities


@dataclass(frozen=True)
class FeatureSpace:
    """Ordered, uniquely named binary features."""

    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("a feature space needs at least one feature")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")

    @property
    def width(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownFeatureError(f"unknown feature {name!r}") from None

    def true_names(self, entity: "Entity") -> frozenset[str]:
        return frozenset(n for n, b in zip(self.names, entity.bits) if b)


@dataclass(frozen=True)
class Entity:
    """A bit vector; position i holds the value of the i-th feature."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"entity bits must be 0/1, got {self.bits!r}")

    @classmethod
    def from_bits(cls, text: str) -> "Entity":
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"entity must be a non-empty string of 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @property
    def width(self) -> int:
        return len(self.bits)

    def flip(self, index: int) -> "Entity":
        return self.with_bits({index: 1 - self.bits[index]})

    def with_bits(self, changes: Mapping[int, int]) -> "Entity":
        bits = list(self.bits)
        for index, bit in changes.items():
            bits[index] = bit
        return Entity(tuple(bits))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def all_entities(width: int) -> Iterator[Entity]:
    """Every entity of the given width, in binary counting order."""
    if width > WIDTH_LIMIT:
        raise WidthLimitError(f"width {width} exceeds the enumeration limit {WIDTH_LIMIT}")
    for bits in product((0, 1), repeat=width):
        yield Entity(bits)


# ---------------------------------------------------------------------------
# Classifiers


class Classifier:
    """Total function from entities to {0, 1}.

    `pure` declares determinism; labels of pure classifiers are cached by
    bit vector, which also serializes access to external processes.
    """

    def __init__(self, width: int, pure: bool = True):
        self.width = width
        self.pure = pure
        self._cache: dict[tuple[int, ...], int] = {}

    def label(self, entity: Entity) -> int:
        if entity.width != self.width:
            raise ValueError(f"entity width {entity.width} != classifier width {self.width}")
        if self.pure:
            hit = self._cache.get(entity.bits)
            if hit is not None:
                return hit
        out = self._label(entity)
        if out not in (0, 1):
            raise ValueError(f"classifier returned {out!r}, expected 0 or 1")
        if self.pure:
            self._cache[entity.bits] = out
        return out

    def _label(self, entity: Entity) -> int:
        raise NotImplementedError


class TableClassifier(Classifier):
    """Classifier backed by an explicit (usually total) truth table."""

    def __init__(self, width: int, table: Mapping[tuple[int, ...], int], total: bool = True):
        super().__init__(width, pure=True)
        self._table = dict(table)
        if total and len(self._table) != 2**width:
            raise ValueError(
                f"truth table has {len(self._table)} rows, needs all {2 ** width}"
            )

    def _label(self, entity: Entity) -> int:
        try:
            return self._table[entity.bits]
        except KeyError:
            raise ValueError(f"no label recorded for entity {entity}") from None


class FunctionClassifier(Classifier):
    """Classifier wrapping an arbitrary Python callable."""

    def __init__(self, width: int, fn, pure: bool = True):
        super().__init__(width, pure=pure)
        self._fn = fn

    def _label(self, entity: Entity) -> int:
        return self._fn(entity)


class ExternalClassifier(Classifier):
    """Black-box classifier reached over a child process's standard streams.

    Protocol (line oriented, one request in flight at a time):

    * startup: the child emits ``xscore-clf v1 n=<width>``;
    * request: <width> characters '0'/'1' followed by a newline;
    * response: a single '0' or '1' line; anything else is an error.
    """

    def __init__(self, command: Sequence[str], expected_width: int | None = None, pure: bool = True):
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ClassifierProtocolError(f"cannot start classifier {command!r}: {exc}") from exc
        width = self._read_handshake(expected_width)
        super().__init__(width, pure=pure)

    def _read_handshake(self, expected_width: int | None) -> int:
        line = self._proc.stdout.readline()
        prefix = PROTOCOL_HANDSHAKE + " n="
        if not line.startswith(prefix):
            self.close()
            raise ClassifierProtocolError(f"bad handshake {line!r}")
        try:
            width = int(line[len(prefix) :].strip())
        except ValueError:
            self.close()
            raise ClassifierProtocolError(f"bad handshake width in {line!r}") from None
        if width < 1:
            self.close()
            raise ClassifierProtocolError(f"bad handshake width {width}")
        if expected_width is not None and width != expected_width:
            self.close()
            raise ClassifierProtocolError(
                f"classifier serves width {width}, expected {expected_width}"
            )
        return width

    def _label(self, entity: Entity) -> int:
        if self._proc.poll() is not None:
            raise ClassifierProtocolError("external classifier process has exited")
        try:
            self._proc.stdin.write(str(entity) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ClassifierProtocolError("external classifier pipe is closed") from exc
        line = self._proc.stdout.readline()
        if line.strip() not in ("0", "1"):
            raise ClassifierProtocolError(f"bad response {line!r}")
        return int(line.strip())

    def close(self) -> None:
        for pipe in (self._proc.stdin, self._proc.stdout):
            try:
                pipe.close()
            except OSError:
                pass
        if self._proc.poll() is None:
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalClassifier":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# ---------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True)
class Constraint:
    """A propositional condition evaluated on a single entity.

    The denial form forbids one combination of feature literals; general
    formulas with negation, conjunction and disjunction are also accepted.
    """

    space: FeatureSpace
    root: formula.Node

    @classmethod
    def denial(
        cls, space: FeatureSpace, positive: Iterable[str], negative: Iterable[str]
    ) -> "Constraint":
        """Forbid "all of `positive` are 1 and all of `negative` are 0"."""
        pos = tuple(sorted(set(positive)))
        neg = tuple(sorted(set(negative)))
        if set(pos) & set(neg):
            raise ValueError(f"positive and negative features overlap: {set(pos) & set(neg)}")
        for name in pos + neg:
            space.index(name)
        literals: list[formula.Node] = [formula.Var(n) for n in pos]
        literals += [formula.Not(formula.Var(n)) for n in neg]
        if not literals:
            raise ValueError("a denial constraint needs at least one literal")
        body = literals[0] if len(literals) == 1 else formula.And(tuple(literals))
        return cls(space=space, root=formula.Not(body))

    def satisfied_by(self, entity: Entity) -> bool:
        if entity.width != self.space.width:
            raise ValueError("entity width does not match the constraint's feature space")
        return formula.evaluate(self.root, self.space.true_names(entity))

    def is_satisfiable(self) -> bool:
        return any(self.satisfied_by(e) for e in all_entities(self.space.width))

    def __str__(self) -> str:
        return formula.to_text(self.root)


def satisfies(entity: Entity, constraint: Constraint) -> bool:
    return constraint.satisfied_by(entity)


def conjoin(constraints: Sequence[Constraint]) -> Constraint:
    """Conjunction of a non-empty set of constraints over one space."""
    if not constraints:
        raise ValueError("cannot conjoin zero constraints")
    space = constraints[0].space
    if any(c.space != space for c in constraints):
        raise ValueError("constraints range over different feature spaces")
    if len(constraints) == 1:
        return constraints[0]
    return Constraint(space=space, root=formula.And(tuple(c.root for c in constraints)))


def parse_constraint(text: str, space: FeatureSpace) -> Constraint:
    """Parse constraint text over the space's feature names.

    Grammar: `!` / `~` negate, `&` binds tighter than `|`, parentheses
    group, and `true` / `false` are constants.  The denial form is written
    `!(F1 & ~F2)`.
    """
    stream = TokenStream(tokenize(text))

    def parse_disj() -> formula.Node:
        parts = [parse_conj()]
        while stream.accept_punct("|"):
            parts.append(parse_conj())
        return parts[0] if len(parts) == 1 else formula.Or(tuple(parts))

    def parse_conj() -> formula.Node:
        parts = [parse_unary()]
        while stream.accept_punct("&"):
            parts.append(parse_unary())
        return parts[0] if len(parts) == 1 else formula.And(tuple(parts))

    def parse_unary() -> formula.Node:
        if stream.accept_punct("!") or stream.accept_punct("~"):
            return formula.Not(parse_unary())
        if stream.accept_punct("("):
            inner = parse_disj()
            stream.expect_punct(")")
            return inner
        tok = stream.expect_name("feature name")
        if tok.text == "true":
            return formula.TRUE
        if tok.text == "false":
            return formula.FALSE
        if tok.text not in space.names:
            raise ParseError(f"unknown feature {tok.text!r}", tok.line, tok.column)
        return formula.Var(tok.text)

    root = parse_disj()
    stream.expect_end()
    return Constraint(space=space, root=root)


# ---------------------------------------------------------------------------
# Distributions


class Distribution:
    """Probability measure over the entity space of a feature space."""

    def __init__(self, space: FeatureSpace):
        self.space = space

    def prob(self, entity: Entity) -> Fraction:
        raise NotImplementedError

    @property
    def finite_support(self) -> tuple[Entity, ...] | None:
        """Entities that may carry mass, when that set is explicit (the
        empirical variant); None means "potentially the whole space"."""
        return None

    def _check(self, entity: Entity) -> None:
        if entity.width != self.space.width:
            raise ValueError(
                f"entity width {entity.width} != space width {self.space.width}"
            )


class UniformDistribution(Distribution):
    """Equal mass 1 / 2^n on every entity."""

    def prob(self, entity: Entity) -> Fraction:
        self._check(entity)
        return Fraction(1, 2**self.space.width)


class EmpiricalDistribution(Distribution):
    """Uniform mass on a duplicate-free sample, 0 elsewhere."""

    def __init__(self, space: FeatureSpace, sample: Iterable[Entity]):
        super().__init__(space)
        entities = tuple(sample)
        if not entities:
            raise ValueError("an empirical distribution needs a non-empty sample")
        if len(set(entities)) != len(entities):
            raise DuplicateSampleError("sample contains duplicate entities")
        for e in entities:
            self._check(e)
        self.sample = entities
        self._members = frozenset(entities)

    def prob(self, entity: Entity) -> Fraction:
        self._check(entity)
        return Fraction(1, len(self.sample)) if entity in self._members else Fraction(0)

    @property
    def finite_support(self) -> tuple[Entity, ...] | None:
        return self.sample


class ProductDistribution(Distribution):
    """Independent per-feature marginals."""

    def __init__(self, space: FeatureSpace, marginals: Sequence[Fraction]):
        super().__init__(space)
        self.marginals = tuple(Fraction(m) for m in marginals)
        if len(self.marginals) != space.width:
            raise ValueError(
                f"{len(self.marginals)} marginals for a width-{space.width} space"
            )
        if any(not 0 <= m <= 1 for m in self.marginals):
            raise ValueError("marginals must lie in [0, 1]")

    @classmethod
    def from_sample(cls, space: FeatureSpace, sample: Sequence[Entity]) -> "ProductDistribution":
        """Estimate each marginal as the sample frequency of the feature."""
        if not sample:
            raise ValueError("cannot estimate marginals from an empty sample")
        counts = [0] * space.width
        for e in sample:
            for i, b in enumerate(e.bits):
                counts[i] += b
        return cls(space, [Fraction(c, len(sample)) for c in counts])

    def prob(self, entity: Entity) -> Fraction:
        self._check(entity)
        out = Fraction(1)
        for bit, m in zip(entity.bits, self.marginals):
            out *= m if bit else 1 - m
        return out


class ConditionedDistribution(Distribution):
    """A base distribution restricted to a constraint's satisfying set.

    Violating entities get probability exactly 0; survivors keep mass
    proportional to the base.  Construction fails when the satisfying set
    has zero base mass (the conditional is undefined).
    """

    def __init__(self, base: Distribution, constraint: Constraint):
        if constraint.space != base.space:
            raise ValueError("constraint and distribution range over different spaces")
        super().__init__(base.space)
        self.base = base
        self.constraint = constraint
        self._mass = self._satisfying_mass()
        if self._mass == 0:
            raise InconsistentConstraintError(
                f"constraint {constraint} has zero mass under the base distribution"
            )

    def _satisfying_mass(self) -> Fraction:
        total = Fraction(0)
        for e in self._candidates():
            if self.constraint.satisfied_by(e):
                total += self.base.prob(e)
        return total

    def _candidates(self) -> Iterator[Entity]:
        support = self.base.finite_support
        if support is not None:
            return iter(support)
        return all_entities(self.space.width)

    def prob(self, entity: Entity) -> Fraction:
        self._check(entity)
        if not self.constraint.satisfied_by(entity):
            return Fraction(0)
        return self.base.prob(entity) / self._mass

    @property
    def finite_support(self) -> tuple[Entity, ...] | None:
        support = self.base.finite_support
        if support is None:
            return None
        return tuple(e for e in support if self.constraint.satisfied_by(e))


def condition(dist: Distribution, constraints: Constraint | Sequence[Constraint]) -> Distribution:
    """Condition a distribution on one constraint or a conjunction of several."""
    if isinstance(constraints, Constraint):
        constraint = constraints
    else:
        constraint = conjoin(list(constraints))
    return ConditionedDistribution(dist, constraint)


# ---------------------------------------------------------------------------
# Conditional expectations


def conditional_expectation(
    dist: Distribution,
    classifier: Classifier,
    entity: Entity,
    fixed: Iterable[str],
) -> Fraction:
    """Expected label when the features in `fixed` are pinned to the
    reference entity's values and the rest vary under `dist`.

    Exact rational; raises `ZeroMassEventError` when the conditioning
    event has no mass (possible under empirical and conditioned variants).
    """
    space = dist.space
    if classifier.width != space.width:
        raise ValueError("classifier and distribution widths differ")
    dist._check(entity)
    fixed_indices = sorted({space.index(name) for name in fixed})
    numerator = Fraction(0)
    mass = Fraction(0)
    for candidate in _agreeing_entities(dist, entity, fixed_indices):
        p = dist.prob(candidate)
        if p == 0:
            continue
        mass += p
        if classifier.label(candidate) == 1:
            numerator += p
    if mass == 0:
        raise ZeroMassEventError(
            f"no mass on entities agreeing with {entity} on features {sorted(fixed)}"
        )
    return numerator / mass


def _agreeing_entities(
    dist: Distribution, entity: Entity, fixed_indices: list[int]
) -> Iterator[Entity]:
    support = dist.finite_support
    if support is not None:
        for e in support:
            if all(e.bits[i] == entity.bits[i] for i in fixed_indices):
                yield e
        return
    free = [i for i in range(entity.width) if i not in fixed_indices]
    if len(free) > WIDTH_LIMIT:
        raise WidthLimitError(
            f"{len(free)} free features exceed the enumeration limit {WIDTH_LIMIT}"
        )
    for bits in product((0, 1), repeat=len(free)):
        yield entity.with_bits(dict(zip(free, bits)))


# ---------------------------------------------------------------------------
# File formats


@dataclass(frozen=True)
class Sample:
    """Entities loaded from a sample CSV, with recorded labels if present."""

    space: FeatureSpace
    entities: tuple[Entity, ...]
    labels: Mapping[Entity, int] | None


def load_truth_table_csv(path: str | Path) -> tuple[FeatureSpace, TableClassifier]:
    """Load a total classifier: feature columns plus a `label` column, one
    row per entity, all 2^n entities present."""
    rows, names = _read_bit_csv(path, required="label")
    space = FeatureSpace(tuple(names))
    table: dict[tuple[int, ...], int] = {}
    for line_no, bits, extra in rows:
        if bits in table:
            raise ValueError(f"{path}: duplicate entity row at line {line_no}")
        table[bits] = extra
    return space, TableClassifier(space.width, table, total=True)


def load_sample_csv(path: str | Path, dedupe: bool = False) -> Sample:
    """Load a sample: feature columns, optional `_label` column.

    Duplicate entities are an error unless `dedupe` is set (repetitions
    carry no extra mass under the empirical distribution anyway).
    """
    rows, names = _read_bit_csv(path, required=None, optional="_label")
    space = FeatureSpace(tuple(names))
    entities: list[Entity] = []
    seen: set[Entity] = set()
    labels: dict[Entity, int] = {}
    has_labels = False
    for line_no, bits, extra in rows:
        e = Entity(bits)
        if e in seen:
            if dedupe:
                continue
            raise DuplicateSampleError(f"{path}: duplicate sample entity at line {line_no}")
        seen.add(e)
        entities.append(e)
        if extra is not None:
            has_labels = True
            labels[e] = extra
    if not entities:
        raise ValueError(f"{path}: sample has no rows")
    return Sample(
        space=space,
        entities=tuple(entities),
        labels=labels if has_labels else None,
    )


def _read_bit_csv(
    path: str | Path, required: str | None, optional: str | None = None
) -> tuple[list[tuple[int, tuple[int, ...], int | None]], list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        special = required or optional
        special_col = header.index(special) if special and special in header else None
        if required is not None and special_col is None:
            raise ValueError(f"{path}: missing required column {required!r}")
        names = [h for i, h in enumerate(header) if i != special_col]
        out = []
        for row_index, row in enumerate(reader):
            line_no = row_index + 2
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row at line {line_no} has {len(row)} fields, expected {len(header)}"
                )
            extra: int | None = None
            bits: list[int] = []
            for i, cell in enumerate(row):
                value = cell.strip()
                if value not in ("0", "1"):
                    raise ValueError(f"{path}: non-bit value {cell!r} at line {line_no}")
                if i == special_col:
                    extra = int(value)
                else:
                    bits.append(int(value))
            out.append((line_no, tuple(bits), extra))
    return out, names
