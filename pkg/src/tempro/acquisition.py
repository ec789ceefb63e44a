"""Online acquisition of persistence rates from observed lifetimes.

Each tracked *class* (a fact-type pattern such as ``TRUCK(?c)``) accumulates
completed stay durations and maintains the decay parameter of its survivor
family from the running mean duration:

* exponential family: ``rate = ln(2) / mean`` (the mean is treated as the
  half-life);
* linear family: ``slope = 0.5 / mean`` (a slope whose area under the
  survivor equals the mean).

Only completed observations are fed in; stays still in progress at the end
of a run are censored and never reach :func:`acquire`, which biases the mean
slightly low on busy horizons but keeps the update one line long.

State file format, one class per line::

    class TRUCK(?c) exponential insts 3 sum 42.0 lambda 0.0495...

The ``lambda`` column is informational (it is always recomputed from
``sum/insts``); ``inf`` denotes a class with no data yet.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, replace

from .theory import LineLexer, ParseError, Pattern, TokenCursor, parse_pattern, unify

FAMILIES = ("linear", "exponential")


def rate(family: str, mu: float) -> float:
    """Decay parameter of the given survivor family for mean duration ``mu``.

    ``mu = 0`` maps to ``inf`` (instant decay); negative means are rejected.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown survivor family {family!r}")
    if math.isnan(mu) or mu < 0:
        raise ValueError(f"mean duration must be >= 0, got {mu}")
    if mu == 0:
        return math.inf
    if family == "linear":
        return 0.5 / mu
    return math.log(2) / mu


@dataclass(frozen=True)
class AcquisitionClass:
    """Running lifetime statistics for one tracked fact-type pattern.

    ``total`` is kept as the exact running sum so saved state reloads
    bit-identically; the decay parameter is always derived from it.
    """

    key: Pattern
    family: str
    insts: int = 0
    total: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown survivor family {self.family!r}")

    @property
    def mean(self) -> float:
        return self.total / self.insts if self.insts else 0.0

    @property
    def lam(self) -> float:
        """Current decay parameter; ``inf`` until the first observation."""
        return rate(self.family, self.mean) if self.insts else math.inf


def acquire(cls: AcquisitionClass, duration: float) -> AcquisitionClass:
    """Fold one completed stay duration into the class statistics."""
    if math.isnan(duration) or math.isinf(duration) or duration < 0:
        raise ValueError(f"duration must be finite and >= 0, got {duration}")
    return replace(cls, insts=cls.insts + 1, total=cls.total + duration)


class UnknownClassError(ValueError):
    """An observation key matched no configured acquisition class."""

    def __init__(self, key: Pattern, known: list[Pattern]):
        known_text = ", ".join(str(k) for k in known) or "(none)"
        super().__init__(f"no acquisition class matches {key}; known classes: {known_text}")
        self.key = key
        self.known = known


class AcquisitionStore:
    """The configured classes, in file order; first matching pattern wins."""

    def __init__(self, classes: list[AcquisitionClass] | None = None):
        self.classes: list[AcquisitionClass] = list(classes or [])

    def route(self, key: Pattern) -> int:
        for index, cls in enumerate(self.classes):
            if unify(cls.key, key) is not None:
                return index
        raise UnknownClassError(key, [c.key for c in self.classes])

    def class_for(self, key: Pattern) -> AcquisitionClass:
        return self.classes[self.route(key)]


def observe_lifetime(
    store: AcquisitionStore, class_key: Pattern, arrival: float, departure: float
) -> AcquisitionClass:
    """Route one completed stay into its class; returns the updated class."""
    if not (math.isfinite(arrival) and math.isfinite(departure)):
        raise ValueError("arrival and departure must be finite")
    if departure < arrival:
        raise ValueError(
            f"departure {departure} precedes arrival {arrival}"
        )
    index = store.route(class_key)
    updated = acquire(store.classes[index], departure - arrival)
    store.classes[index] = updated
    return updated


def _format_number(x: float) -> str:
    return "inf" if math.isinf(x) else repr(x)


def save_state(store: AcquisitionStore) -> str:
    lines = [
        f"class {cls.key} {cls.family} insts {cls.insts} "
        f"sum {_format_number(cls.total)} lambda {_format_number(cls.lam)}"
        for cls in store.classes
    ]
    return "\n".join(lines) + "\n" if lines else ""


def load_state(text: str) -> AcquisitionStore:
    lexer = LineLexer(text)
    classes: list[AcquisitionClass] = []
    for lineno in range(1, len(lexer.lines) + 1):
        tokens = lexer.tokenize(lineno)
        if not tokens:
            continue
        cur = TokenCursor(tokens, lineno, len(lexer.lines[lineno - 1]))
        cur.take_keyword("class")
        key = parse_pattern(cur)
        family_tok = cur.peek()
        if family_tok is None or family_tok.kind != "name" or family_tok.text not in FAMILIES:
            raise cur.error("expected 'linear' or 'exponential'")
        cur.pos += 1
        cur.take_keyword("insts")
        insts_tok = cur.peek()
        insts = cur.take_number("an observation count")
        if insts != int(insts) or insts < 0:
            raise ParseError(
                f"insts must be a non-negative integer, got {insts}",
                insts_tok.line,
                insts_tok.col,
            )
        cur.take_keyword("sum")
        total_tok = cur.peek()
        total = cur.take_number("a duration sum")
        if math.isinf(total) or total < 0:
            raise ParseError(
                f"sum must be finite and >= 0, got {total}", total_tok.line, total_tok.col
            )
        cur.take_keyword("lambda")
        cur.take_number("a decay parameter")  # informational; recomputed
        cur.expect_end()
        classes.append(AcquisitionClass(key, family_tok.text, int(insts), total))
    return AcquisitionStore(classes)


def save_state_file(store: AcquisitionStore, path: str) -> None:
    """Atomic save: write to a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".acquire-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(save_state(store))
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


@dataclass(frozen=True)
class Observation:
    key: Pattern
    arrival: float
    departure: float
    line: int


def parse_observations(text: str) -> list[Observation]:
    """Parse completed-stay observations, one per line::

        observe TRUCK(ACME) arrival 0 departure 12.5
    """
    lexer = LineLexer(text)
    out: list[Observation] = []
    for lineno in range(1, len(lexer.lines) + 1):
        tokens = lexer.tokenize(lineno)
        if not tokens:
            continue
        cur = TokenCursor(tokens, lineno, len(lexer.lines[lineno - 1]))
        cur.take_keyword("observe")
        key_tok = cur.peek()
        key = parse_pattern(cur)
        if not key.is_ground:
            raise ParseError(f"observation key {key} must be ground", key_tok.line, key_tok.col)
        cur.take_keyword("arrival")
        arrival = cur.take_number("an arrival time")
        cur.take_keyword("departure")
        departure_tok = cur.peek()
        departure = cur.take_number("a departure time")
        cur.expect_end()
        if not (math.isfinite(arrival) and math.isfinite(departure)) or departure < arrival:
            raise ParseError(
                f"invalid stay [{arrival}, {departure}]", departure_tok.line, departure_tok.col
            )
        out.append(Observation(key, arrival, departure, lineno))
    return out
