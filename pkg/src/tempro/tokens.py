"""Tokens: concrete event and fact instances with their probability curves.

An *event token* is one possible occurrence of a ground event type inside a
time window ``[est, lst]`` (earliest/latest start time), carrying a per-cell
occurrence density.  A *fact token* is one derivation of a ground fact,
initiated by exactly one event token and decaying according to a persistence
survivor; it carries a per-cell probability mass.

User-supplied event tokens ("basic facts") get a truncated-Gaussian density
over their window: mean at the window midpoint, standard deviation one sixth
of the window width, scaled so the discrete integral over the window equals
the stated occurrence probability ``kappa``.  A zero-width window puts all of
``kappa`` into the single cell containing it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import StepSeries, TimeGrid
from .theory import (
    GroundKey,
    LineLexer,
    ParseError,
    Pattern,
    Survivor,
    TokenCursor,
    TypeKey,
    parse_pattern,
)


@dataclass(frozen=True)
class UserSupplied:
    """Derivation marker for tokens read from a basic-facts file."""


@dataclass(frozen=True)
class BuiltIn:
    """Derivation marker for the ALWAYS token."""


@dataclass(frozen=True)
class RuleDerived:
    """Derivation by one projection-rule instantiation.

    ``trigger`` and ``antecedents`` are token ids; together with the rule
    index they identify the instantiation, so re-projection cannot duplicate
    tokens.
    """

    rule_index: int
    trigger: int
    antecedents: tuple[int, ...]


Derivation = UserSupplied | BuiltIn | RuleDerived


@dataclass
class EventToken:
    tid: int
    event_type: Pattern
    est: float
    lst: float
    kappa: float
    derivation: Derivation
    density: StepSeries | None = None

    @property
    def is_user(self) -> bool:
        return isinstance(self.derivation, UserSupplied)


@dataclass
class FactToken:
    tid: int
    fact_type: Pattern
    initiating_event: int  # token id of the event that makes this fact true
    persistence: Survivor | None  # None only for the built-in ALWAYS token
    est: float
    derivation: Derivation
    mass: StepSeries | None = None
    closed: bool = False
    close_cell: int | None = None

    @property
    def is_builtin(self) -> bool:
        return isinstance(self.derivation, BuiltIn)


Token = EventToken | FactToken


class TokenStore:
    """All tokens of one projection problem, split into events and facts.

    Tokens get consecutive ids in creation order; every id belongs to exactly
    one of the two partitions.  ``ancestry`` maps each token to the set of
    ground types its derivation passes through (including its own), which the
    projector uses to cut self-supporting derivation chains.
    """

    def __init__(self) -> None:
        self.events: list[EventToken] = []
        self.facts: list[FactToken] = []
        self._by_id: dict[int, Token] = {}
        self._events_by_key: dict[TypeKey, list[int]] = {}
        self._facts_by_key: dict[TypeKey, list[int]] = {}
        self.ancestry: dict[int, frozenset[GroundKey]] = {}
        self.derivation_keys: set[tuple] = set()
        self.always_tid: int | None = None
        self.sweep_stats = None  # set by refinement.refine

    def __len__(self) -> int:
        return len(self.events) + len(self.facts)

    def token(self, tid: int) -> Token:
        return self._by_id[tid]

    def add_event(
        self,
        event_type: Pattern,
        est: float,
        lst: float,
        kappa: float,
        derivation: Derivation,
        density: StepSeries | None = None,
    ) -> EventToken:
        if not event_type.is_ground:
            raise ValueError(f"event token type must be ground, got {event_type}")
        token = EventToken(len(self._by_id), event_type, est, lst, kappa, derivation, density)
        self.events.append(token)
        self._by_id[token.tid] = token
        self._events_by_key.setdefault(event_type.key, []).append(token.tid)
        self._record_ancestry(token.tid, event_type, derivation)
        return token

    def add_fact(
        self,
        fact_type: Pattern,
        initiating_event: int,
        persistence: Survivor | None,
        est: float,
        derivation: Derivation,
    ) -> FactToken:
        if not fact_type.is_ground:
            raise ValueError(f"fact token type must be ground, got {fact_type}")
        token = FactToken(len(self._by_id), fact_type, initiating_event, persistence, est, derivation)
        self.facts.append(token)
        self._by_id[token.tid] = token
        self._facts_by_key.setdefault(fact_type.key, []).append(token.tid)
        self._record_ancestry(token.tid, fact_type, derivation)
        return token

    def _record_ancestry(self, tid: int, ground: Pattern, derivation: Derivation) -> None:
        own = {ground.ground_key}
        if isinstance(derivation, RuleDerived):
            own.update(self.ancestry[derivation.trigger])
            for ant in derivation.antecedents:
                own.update(self.ancestry[ant])
        self.ancestry[tid] = frozenset(own)

    def ensure_always(self) -> FactToken:
        """The built-in ALWAYS fact token: timelessly true, never decays."""
        if self.always_tid is None:
            token = self.add_fact(
                Pattern("ALWAYS"),
                initiating_event=-1,
                persistence=None,  # never consulted: the token is never updated
                est=-math.inf,
                derivation=BuiltIn(),
            )
            self.always_tid = token.tid
        token = self._by_id[self.always_tid]
        assert isinstance(token, FactToken)
        return token

    def events_of_type(self, key: TypeKey) -> list[EventToken]:
        return [self._by_id[t] for t in self._events_by_key.get(key, [])]  # type: ignore[misc]

    def facts_of_type(self, key: TypeKey) -> list[FactToken]:
        return [self._by_id[t] for t in self._facts_by_key.get(key, [])]  # type: ignore[misc]

    def reset_sweep(self) -> None:
        """Forget closure state from a previous refinement sweep."""
        for fact in self.facts:
            fact.closed = False
            fact.close_cell = None


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _window_density(grid: TimeGrid, est: float, lst: float, kappa: float) -> StepSeries:
    """Truncated-Gaussian occurrence density for a user event window.

    The in-window discrete integral equals ``kappa``; cells outside the grid
    are dropped, so a window sticking out of the horizon keeps only the mass
    that falls inside.
    """
    values = np.zeros(grid.omega)
    if est == lst:
        cell = grid.time_to_cell(est)
        if not grid.contains_cell(cell):
            raise ValueError(f"point event at {est} lies outside the horizon")
        values[cell - 1] = kappa / grid.delta
        return StepSeries(grid, values)
    mu = 0.5 * (est + lst)
    sigma = (lst - est) / 6.0
    z = _norm_cdf((lst - mu) / sigma) - _norm_cdf((est - mu) / sigma)
    first = max(1, grid.time_to_cell(est))
    last = min(grid.omega, grid.time_to_cell(lst))
    for i in range(first, last + 1):
        lo = max(est, grid.cell_start(i))
        hi = min(lst, grid.cell_end(i))
        if hi <= lo:
            continue
        weight = (_norm_cdf((hi - mu) / sigma) - _norm_cdf((lo - mu) / sigma)) / z
        values[i - 1] = kappa * weight / grid.delta
    return StepSeries(grid, values)


def add_basic_event(
    store: TokenStore,
    event_type: Pattern,
    est: float,
    lst: float,
    kappa: float,
    grid: TimeGrid,
) -> EventToken:
    """Add a user-supplied event token with its window density filled in."""
    if not event_type.is_ground:
        raise ValueError(f"basic event type must be ground, got {event_type}")
    if not (math.isfinite(est) and math.isfinite(lst) and est <= lst):
        raise ValueError(f"invalid window [{est}, {lst}]")
    if not (0.0 <= kappa <= 1.0):
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    if est >= grid.end or lst < grid.origin or (est == lst and not grid.contains_cell(grid.time_to_cell(est))):
        raise ValueError(
            f"window [{est}, {lst}] lies entirely outside the horizon "
            f"[{grid.origin}, {grid.end})"
        )
    density = _window_density(grid, est, lst, kappa)
    return store.add_event(event_type, est, lst, kappa, UserSupplied(), density)


def init_vectors(store: TokenStore, grid: TimeGrid) -> None:
    """(Re)allocate every token's curve on ``grid``.

    User event densities are recomputed from their windows; the ALWAYS mass
    is constant 1; everything else starts at zero for the refinement sweep
    to fill in.
    """
    for event in store.events:
        if event.is_user:
            event.density = _window_density(grid, event.est, event.lst, event.kappa)
        else:
            event.density = StepSeries.zeros(grid)
    for fact in store.facts:
        if fact.is_builtin:
            fact.mass = StepSeries.ones(grid)
        else:
            fact.mass = StepSeries.zeros(grid)


@dataclass(frozen=True)
class BasicEventSpec:
    event_type: Pattern
    est: float
    lst: float
    kappa: float
    line: int


def parse_basic_facts(text: str) -> list[BasicEventSpec]:
    """Parse the basic-facts format, one observed event per line::

        event ARRIVE(TRUCK14) est 0 lst 10 kappa 1.0
    """
    lexer = LineLexer(text)
    specs: list[BasicEventSpec] = []
    for lineno in range(1, len(lexer.lines) + 1):
        tokens = lexer.tokenize(lineno)
        if not tokens:
            continue
        cur = TokenCursor(tokens, lineno, len(lexer.lines[lineno - 1]))
        cur.take_keyword("event")
        pattern_tok = cur.peek()
        pattern = parse_pattern(cur)
        if not pattern.is_ground:
            raise ParseError(
                f"basic event {pattern} must be ground", pattern_tok.line, pattern_tok.col
            )
        cur.take_keyword("est")
        est = cur.take_number("the earliest start time")
        cur.take_keyword("lst")
        lst_tok = cur.peek()
        lst = cur.take_number("the latest start time")
        cur.take_keyword("kappa")
        kappa_tok = cur.peek()
        kappa = cur.take_number("an occurrence probability")
        cur.expect_end()
        if not (math.isfinite(est) and math.isfinite(lst) and est <= lst):
            raise ParseError(f"window [{est}, {lst}] is invalid", lst_tok.line, lst_tok.col)
        if math.isnan(kappa) or not (0.0 <= kappa <= 1.0):
            raise ParseError(
                f"kappa must lie in [0, 1], got {kappa}", kappa_tok.line, kappa_tok.col
            )
        specs.append(BasicEventSpec(pattern, est, lst, kappa, lineno))
    return specs


def load_basic_facts(store: TokenStore, text: str, grid: TimeGrid) -> list[EventToken]:
    """Parse and add every basic event in ``text``; returns the new tokens."""
    out = []
    for spec in parse_basic_facts(text):
        try:
            out.append(add_basic_event(store, spec.event_type, spec.est, spec.lst, spec.kappa, grid))
        except ValueError as exc:
            raise ParseError(str(exc), spec.line, 1) from exc
    return out
