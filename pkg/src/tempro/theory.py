"""Causal theories: projection rules, persistence rules, and their text format.

A theory is a set of statements, one per line::

    # comments run to end of line
    persist ATDOCK(?t) exp 0.00342          # exponential survivor, rate per time unit
    persist CRANE_FREE lin 0.01             # linear survivor, slope per time unit
    project ALWAYS, ARRIVE(?t) => ATDOCK(?t) @ 1.0

A ``project`` statement lists one or more patterns before ``=>``; the last
one is the triggering event pattern, the preceding ones (if any) are fact
antecedents that must already hold.  The consequent fact after ``=>`` becomes
true with probability ``kappa`` (after ``@``) when the trigger occurs while
all antecedents hold.  ``ALWAYS`` is the built-in, timelessly true fact.

Patterns are ``NAME`` or ``NAME(arg, ...)`` with upper-case names and
constants; variables are written ``?x``.
"""
from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

TypeKey = tuple[str, int]  # (name, arity): a fact or event type ignoring bindings
GroundKey = tuple[str, tuple[str, ...]]  # fully instantiated type


def is_variable(term: str) -> bool:
    return term.startswith("?")


@dataclass(frozen=True)
class Pattern:
    """A possibly-variable fact or event type, e.g. ``ATDOCK(?t)``.

    The same shape describes fact types and event types; which one a pattern
    is follows from its position in a rule.
    """

    name: str
    args: tuple[str, ...] = ()

    @property
    def key(self) -> TypeKey:
        return (self.name, len(self.args))

    @property
    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    @property
    def ground_key(self) -> GroundKey:
        if not self.is_ground:
            raise ValueError(f"pattern {self} is not ground")
        return (self.name, self.args)

    def variables(self) -> set[str]:
        return {a for a in self.args if is_variable(a)}

    def substitute(self, binding: dict[str, str]) -> "Pattern":
        return Pattern(self.name, tuple(binding.get(a, a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(self.args)})"


ALWAYS = Pattern("ALWAYS")


def unify(pattern: Pattern, ground: Pattern, binding: dict[str, str] | None = None) -> dict[str, str] | None:
    """Match ``pattern`` against a ground instance, extending ``binding``.

    Returns the extended binding, or None when the two cannot match.
    """
    if pattern.name != ground.name or len(pattern.args) != len(ground.args):
        return None
    out = dict(binding) if binding else {}
    for p, g in zip(pattern.args, ground.args):
        if is_variable(p):
            bound = out.get(p)
            if bound is None:
                out[p] = g
            elif bound != g:
                return None
        elif p != g:
            return None
    return out


@dataclass(frozen=True)
class Exponential:
    """Survivor ``exp(-rate * elapsed)``; ``rate = ln(2) / half_life``."""

    rate: float


@dataclass(frozen=True)
class Linear:
    """Survivor ``max(0, 1 - slope * elapsed)``."""

    slope: float


Survivor = Exponential | Linear

#: Fact types without a persistence rule never decay.
DEFAULT_SURVIVOR = Exponential(0.0)


@dataclass(frozen=True)
class PersistenceRule:
    subject: Pattern
    survivor: Survivor


@dataclass(frozen=True)
class ProjectionRule:
    antecedents: tuple[Pattern, ...]
    trigger: Pattern
    consequent: Pattern
    kappa: float


@dataclass
class CausalTheory:
    projection_rules: tuple[ProjectionRule, ...] = ()
    persistence_rules: tuple[PersistenceRule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "projection_rules", tuple(self.projection_rules))
        object.__setattr__(self, "persistence_rules", tuple(self.persistence_rules))

    def persistence_for(self, fact: Pattern) -> Survivor:
        """Survivor for a ground fact: first matching rule, else no decay.

        When several rule subjects could match, the first one in file order
        wins; a fact matching no rule gets :data:`DEFAULT_SURVIVOR` and a
        warning, since an undeclared persistence usually means a typo.
        """
        for rule in self.persistence_rules:
            if unify(rule.subject, fact) is not None:
                return rule.survivor
        warnings.warn(
            f"no persistence rule matches {fact}; assuming it never decays",
            stacklevel=2,
        )
        return DEFAULT_SURVIVOR

    def pretty(self) -> str:
        """Canonical text form; ``parse_theory`` round-trips it."""
        lines = []
        for p in self.persistence_rules:
            kind, value = (
                ("exp", p.survivor.rate)
                if isinstance(p.survivor, Exponential)
                else ("lin", p.survivor.slope)
            )
            lines.append(f"persist {p.subject} {kind} {value!r}")
        for r in self.projection_rules:
            head = ", ".join(str(p) for p in (*r.antecedents, r.trigger))
            lines.append(f"project {head} => {r.consequent} @ {r.kappa!r}")
        return "\n".join(lines) + "\n" if lines else ""


class ParseError(ValueError):
    """Syntax or validation error in one of the line-oriented text formats."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#.*)
      | (?P<arrow>=>)
      | (?P<at>@)
      | (?P<lparen>\()
      | (?P<rparen>\))
      | (?P<comma>,)
      | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
      | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_UPPER_RE = re.compile(r"[A-Z][A-Z0-9_]*$")


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


class LineLexer:
    """Tokenizer shared by the theory, facts, scenario and state formats."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def tokenize(self, lineno: int) -> list[Token]:
        line = self.lines[lineno - 1]
        out: list[Token] = []
        pos = 0
        while pos < len(line):
            m = _TOKEN_RE.match(line, pos)
            if m is None:
                raise ParseError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
            kind = m.lastgroup or ""
            if kind == "comment":
                break
            if kind != "ws":
                out.append(Token(kind, m.group(), lineno, m.start() + 1))
            pos = m.end()
        return out


class TokenCursor:
    """Sequential reader over one line's tokens with positioned errors."""

    def __init__(self, tokens: list[Token], lineno: int, line_len: int):
        self.tokens = tokens
        self.pos = 0
        self.lineno = lineno
        self.line_len = line_len

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        col = tok.col if tok else self.line_len + 1
        return ParseError(message, self.lineno, col)

    def take(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            raise self.error(f"expected {what or kind}" + (f", got {tok.text!r}" if tok else ""))
        self.pos += 1
        return tok

    def take_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "name" or tok.text != word:
            raise self.error(f"expected {word!r}" + (f", got {tok.text!r}" if tok else ""))
        self.pos += 1
        return tok

    def take_number(self, what: str = "a number") -> float:
        tok = self.peek()
        if tok is not None and tok.kind == "number":
            self.pos += 1
            return float(tok.text)
        if tok is not None and tok.kind == "name" and tok.text.lower() == "inf":
            self.pos += 1
            return math.inf
        raise self.error(f"expected {what}" + (f", got {tok.text!r}" if tok else ""))

    def expect_end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)


def parse_pattern(cur: TokenCursor) -> Pattern:
    name_tok = cur.take("name", "a pattern name")
    if not _UPPER_RE.match(name_tok.text):
        raise ParseError(
            f"pattern name {name_tok.text!r} must be upper-case", name_tok.line, name_tok.col
        )
    args: list[str] = []
    nxt = cur.peek()
    if nxt is not None and nxt.kind == "lparen":
        cur.take("lparen")
        while True:
            tok = cur.peek()
            if tok is None:
                raise cur.error("unterminated argument list")
            if tok.kind == "var":
                args.append(tok.text)
                cur.pos += 1
            elif tok.kind == "name":
                if not _UPPER_RE.match(tok.text):
                    raise ParseError(
                        f"constant {tok.text!r} must be upper-case", tok.line, tok.col
                    )
                args.append(tok.text)
                cur.pos += 1
            else:
                raise cur.error(f"expected a constant or ?variable, got {tok.text!r}")
            tok = cur.peek()
            if tok is not None and tok.kind == "comma":
                cur.take("comma")
                continue
            cur.take("rparen", "')'")
            break
    return Pattern(name_tok.text, tuple(args))


def parse_pattern_text(text: str) -> Pattern:
    """Parse a single pattern given on its own, e.g. a CLI query argument."""
    lexer = LineLexer(text)
    if len(lexer.lines) != 1:
        raise ParseError("expected a single pattern", 1, 1)
    cur = TokenCursor(lexer.tokenize(1), 1, len(text))
    pattern = parse_pattern(cur)
    cur.expect_end()
    return pattern


def _starts_pattern(tok: Token | None) -> bool:
    return tok is not None and tok.kind == "name"


def _canonical_subject(pattern: Pattern) -> tuple:
    """Subject pattern with variables renamed by first appearance."""
    names: dict[str, str] = {}
    args = []
    for a in pattern.args:
        if is_variable(a):
            args.append(names.setdefault(a, f"?{len(names)}"))
        else:
            args.append(a)
    return (pattern.name, tuple(args))


def parse_theory(text: str) -> CausalTheory:
    """Parse the rule language; raises :class:`ParseError` with line/column."""
    lexer = LineLexer(text)
    projection_rules: list[ProjectionRule] = []
    persistence_rules: list[PersistenceRule] = []
    seen_subjects: dict[tuple, int] = {}
    for lineno in range(1, len(lexer.lines) + 1):
        tokens = lexer.tokenize(lineno)
        if not tokens:
            continue
        cur = TokenCursor(tokens, lineno, len(lexer.lines[lineno - 1]))
        head = cur.peek()
        if head.kind != "name" or head.text not in ("persist", "project"):
            raise cur.error("expected 'persist' or 'project'")
        if head.text == "persist":
            cur.pos += 1
            subject = parse_pattern(cur)
            kind_tok = cur.peek()
            if kind_tok is None or kind_tok.kind != "name" or kind_tok.text not in ("exp", "lin"):
                raise cur.error("expected 'exp' or 'lin'")
            cur.pos += 1
            value_tok = cur.peek()
            value = cur.take_number("a decay parameter")
            if math.isnan(value) or value < 0:
                raise ParseError(
                    f"decay parameter must be >= 0, got {value}", value_tok.line, value_tok.col
                )
            cur.expect_end()
            canon = _canonical_subject(subject)
            if canon in seen_subjects:
                raise ParseError(
                    f"duplicate persistence rule for {subject} "
                    f"(first given on line {seen_subjects[canon]})",
                    lineno,
                    head.col,
                )
            seen_subjects[canon] = lineno
            survivor: Survivor = Exponential(value) if kind_tok.text == "exp" else Linear(value)
            persistence_rules.append(PersistenceRule(subject, survivor))
        else:
            cur.pos += 1
            patterns = [parse_pattern(cur)]
            while True:
                tok = cur.peek()
                if tok is not None and tok.kind == "comma":
                    cur.take("comma")
                    patterns.append(parse_pattern(cur))
                elif _starts_pattern(tok):
                    patterns.append(parse_pattern(cur))
                else:
                    break
            cur.take("arrow", "'=>'")
            consequent = parse_pattern(cur)
            at_tok = cur.take("at", "'@'")
            kappa_tok = cur.peek()
            kappa = cur.take_number("a probability")
            if math.isnan(kappa) or not (0.0 <= kappa <= 1.0):
                raise ParseError(
                    f"kappa must lie in [0, 1], got {kappa}", kappa_tok.line, kappa_tok.col
                )
            cur.expect_end()
            trigger = patterns[-1]
            antecedents = tuple(patterns[:-1])
            allowed = trigger.variables().union(*(p.variables() for p in antecedents)) \
                if antecedents else trigger.variables()
            unsafe = consequent.variables() - allowed
            if unsafe:
                raise ParseError(
                    f"consequent variable {sorted(unsafe)[0]} appears in neither "
                    "the trigger nor any antecedent",
                    at_tok.line,
                    at_tok.col,
                )
            projection_rules.append(
                ProjectionRule(antecedents, trigger, consequent, kappa)
            )
    return CausalTheory(tuple(projection_rules), tuple(persistence_rules))


@dataclass
class DependencyGraph:
    """Fact-type dependency relation: arc Q -> R when some rule can make Q's
    truth a precondition for deriving R (binding-insensitive)."""

    vertices: set[TypeKey] = field(default_factory=set)
    arcs: set[tuple[TypeKey, TypeKey]] = field(default_factory=set)

    def successors(self, key: TypeKey) -> list[TypeKey]:
        return sorted(r for (q, r) in self.arcs if q == key)

    def find_cycle(self, within: set[TypeKey] | None = None) -> list[TypeKey] | None:
        """A cycle among ``within`` (default: all vertices), or None.

        Returned as the list of vertices along the cycle, start repeated last.
        """
        nodes = self.vertices if within is None else (self.vertices & within)
        adjacency = {v: [r for (q, r) in self.arcs if q == v and r in nodes] for v in nodes}
        WHITE, GREY, BLACK = 0, 1, 2
        color = {v: WHITE for v in nodes}
        parent: dict[TypeKey, TypeKey] = {}
        for root in sorted(nodes):
            if color[root] != WHITE:
                continue
            stack = [(root, iter(adjacency[root]))]
            color[root] = GREY
            while stack:
                node, it = stack[-1]
                advanced = False
                for nxt in it:
                    if color[nxt] == WHITE:
                        color[nxt] = GREY
                        parent[nxt] = node
                        stack.append((nxt, iter(adjacency[nxt])))
                        advanced = True
                        break
                    if color[nxt] == GREY:
                        cycle = [nxt]
                        cursor = node
                        while cursor != nxt:
                            cycle.append(cursor)
                            cursor = parent[cursor]
                        cycle.append(nxt)
                        cycle[1:-1] = cycle[-2:0:-1]
                        return cycle
                if not advanced:
                    color[node] = BLACK
                    stack.pop()
            # fall through: this component is acyclic
        return None


def dependency_graph(theory: CausalTheory) -> DependencyGraph:
    """Antecedent-to-consequent reachability over the projection rules."""
    graph = DependencyGraph()
    for rule in theory.projection_rules:
        graph.vertices.add(rule.consequent.key)
        for antecedent in rule.antecedents:
            graph.vertices.add(antecedent.key)
            graph.arcs.add((antecedent.key, rule.consequent.key))
    return graph
