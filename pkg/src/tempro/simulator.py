"""Synthetic arrival/departure scenarios for exercising acquisition.

A scenario describes entities of one or more classes arriving over time and
staying for a random lifetime.  ``generate`` turns it into (a) a basic-facts
file of arrival events and (b) the completed-stay observations that
:func:`tempro.acquisition.observe_lifetime` would receive.  Stays still in
progress at the horizon are censored: they emit no observation, matching the
acquisition sampling rule.

Randomness comes from :class:`random.Random` (Mersenne Twister, stable
across platforms and Python versions) seeded from the scenario, with all
variates drawn by inverse CDF from ``random()``; generated files are
byte-identical for a fixed scenario.

Scenario file format, a single statement plus optional comments::

    scenario seed 42 class TRUCK(?c) exp 0.1 arrivals poisson 1.0 count 10000 horizon 20000

Lifetime distributions: ``exp <rate>`` (mean ``1/rate``), ``uniform <lo> <hi>``
(mean ``(lo+hi)/2``), ``fixed <d>``.  Arrivals: ``poisson <rate>`` or an
explicit schedule ``at t1, t2, ...`` whose length must equal ``count``.
With several ``class`` clauses, entities are assigned round-robin.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .acquisition import rate
from .theory import LineLexer, ParseError, Pattern, TokenCursor, parse_pattern


@dataclass(frozen=True)
class ExponentialLifetime:
    rate: float

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def sample(self, rng: random.Random) -> float:
        return -math.log(1.0 - rng.random()) / self.rate


@dataclass(frozen=True)
class UniformLifetime:
    lo: float
    hi: float

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng: random.Random) -> float:
        return self.lo + (self.hi - self.lo) * rng.random()


@dataclass(frozen=True)
class FixedLifetime:
    duration: float

    @property
    def mean(self) -> float:
        return self.duration

    def sample(self, rng: random.Random) -> float:
        return self.duration


Lifetime = ExponentialLifetime | UniformLifetime | FixedLifetime


@dataclass(frozen=True)
class PoissonArrivals:
    rate: float


@dataclass(frozen=True)
class ScheduledArrivals:
    times: tuple[float, ...]


@dataclass
class Scenario:
    seed: int
    classes: list[tuple[Pattern, Lifetime]]
    arrivals: PoissonArrivals | ScheduledArrivals
    count: int
    horizon: float


@dataclass
class SimulationOutput:
    facts_text: str
    observations: list[tuple[Pattern, float, float]]  # (class instance key, arrival, departure)
    observations_text: str


def generate(scenario: Scenario) -> SimulationOutput:
    """Sample the scenario into a basic-facts file and completed stays.

    Entity ``k`` (1-based) arrives at its scheduled or Poisson-process time,
    becomes the ground instance ``E<k>`` of its class pattern, and emits

    * an ``ARRIVE(E<k>)`` point event if it arrives before the horizon, and
    * an ``observe`` record if its stay completes by the horizon.
    """
    rng = random.Random(scenario.seed)
    if isinstance(scenario.arrivals, ScheduledArrivals):
        if len(scenario.arrivals.times) != scenario.count:
            raise ValueError(
                f"schedule lists {len(scenario.arrivals.times)} arrivals "
                f"but count is {scenario.count}"
            )
    fact_lines: list[str] = []
    observation_lines: list[str] = []
    observations: list[tuple[Pattern, float, float]] = []
    clock = 0.0
    for k in range(1, scenario.count + 1):
        if isinstance(scenario.arrivals, ScheduledArrivals):
            arrival = scenario.arrivals.times[k - 1]
        else:
            clock += -math.log(1.0 - rng.random()) / scenario.arrivals.rate
            arrival = clock
        pattern, lifetime = scenario.classes[(k - 1) % len(scenario.classes)]
        duration = lifetime.sample(rng)
        departure = arrival + duration
        entity = f"E{k}"
        key = pattern.substitute({v: entity for v in pattern.variables()})
        if arrival < scenario.horizon:
            fact_lines.append(f"event ARRIVE({entity}) est {arrival!r} lst {arrival!r} kappa 1.0")
        if departure <= scenario.horizon:
            observations.append((key, arrival, departure))
            observation_lines.append(f"observe {key} arrival {arrival!r} departure {departure!r}")
    facts_text = "\n".join(fact_lines) + "\n" if fact_lines else ""
    observations_text = "\n".join(observation_lines) + "\n" if observation_lines else ""
    return SimulationOutput(facts_text, observations, observations_text)


@dataclass(frozen=True)
class ConvergenceRow:
    class_key: str
    n: int
    acquired: float
    reference: float
    relative_error: float


_CHECKPOINTS = (10, 100, 1000, 10000)


def run_convergence(scenario: Scenario, family: str) -> list[ConvergenceRow]:
    """Feed generated lifetimes through acquisition and report the error curve.

    For each class, the acquired decay parameter after n = 10, 100, 1000,
    10000 observations (checkpoints beyond the available count are dropped;
    when fewer than 10 are available, the final count is reported) is
    compared against ``rate(family, true mean)`` of the generating
    distribution.
    """
    from .acquisition import AcquisitionClass, acquire

    output = generate(scenario)
    rows: list[ConvergenceRow] = []
    for pattern, lifetime in scenario.classes:
        durations = [
            departure - arrival
            for key, arrival, departure in output.observations
            if key.name == pattern.name and len(key.args) == len(pattern.args)
        ]
        reference = rate(family, lifetime.mean)
        checkpoints = [c for c in _CHECKPOINTS if c <= len(durations)]
        if not checkpoints and durations:
            checkpoints = [len(durations)]
        cls = AcquisitionClass(pattern, family)
        for index, duration in enumerate(durations, start=1):
            cls = acquire(cls, duration)
            if index in checkpoints:
                if math.isinf(reference):
                    error = 0.0 if math.isinf(cls.lam) else math.inf
                else:
                    error = abs(cls.lam - reference) / reference
                rows.append(ConvergenceRow(str(pattern), index, cls.lam, reference, error))
    return rows


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario file; exactly one ``scenario`` statement allowed."""
    lexer = LineLexer(text)
    scenario: Scenario | None = None
    for lineno in range(1, len(lexer.lines) + 1):
        tokens = lexer.tokenize(lineno)
        if not tokens:
            continue
        if scenario is not None:
            raise ParseError("expected a single scenario statement", lineno, tokens[0].col)
        cur = TokenCursor(tokens, lineno, len(lexer.lines[lineno - 1]))
        cur.take_keyword("scenario")
        cur.take_keyword("seed")
        seed_tok = cur.peek()
        seed = cur.take_number("a seed")
        if seed != int(seed) or seed < 0:
            raise ParseError(
                f"seed must be a non-negative integer, got {seed}", seed_tok.line, seed_tok.col
            )
        classes: list[tuple[Pattern, Lifetime]] = []
        while cur.peek() is not None and cur.peek().kind == "name" and cur.peek().text == "class":
            cur.take_keyword("class")
            pattern = parse_pattern(cur)
            dist_tok = cur.peek()
            if dist_tok is None or dist_tok.kind != "name":
                raise cur.error("expected 'exp', 'uniform' or 'fixed'")
            cur.pos += 1
            if dist_tok.text == "exp":
                value_tok = cur.peek()
                value = cur.take_number("a rate")
                if not (value > 0 and math.isfinite(value)):
                    raise ParseError(
                        f"rate must be finite and > 0, got {value}", value_tok.line, value_tok.col
                    )
                lifetime: Lifetime = ExponentialLifetime(value)
            elif dist_tok.text == "uniform":
                lo_tok = cur.peek()
                lo = cur.take_number("a lower bound")
                hi_tok = cur.peek()
                hi = cur.take_number("an upper bound")
                if not (0 <= lo <= hi and math.isfinite(hi)):
                    raise ParseError(
                        f"bounds must satisfy 0 <= lo <= hi, got [{lo}, {hi}]",
                        (hi_tok or lo_tok).line,
                        (hi_tok or lo_tok).col,
                    )
                lifetime = UniformLifetime(lo, hi)
            elif dist_tok.text == "fixed":
                d_tok = cur.peek()
                d = cur.take_number("a duration")
                if not (d >= 0 and math.isfinite(d)):
                    raise ParseError(
                        f"duration must be finite and >= 0, got {d}", d_tok.line, d_tok.col
                    )
                lifetime = FixedLifetime(d)
            else:
                raise ParseError(
                    f"unknown lifetime distribution {dist_tok.text!r}",
                    dist_tok.line,
                    dist_tok.col,
                )
            classes.append((pattern, lifetime))
        if not classes:
            raise cur.error("expected at least one 'class' clause")
        cur.take_keyword("arrivals")
        spec_tok = cur.peek()
        if spec_tok is None or spec_tok.kind != "name":
            raise cur.error("expected 'poisson' or 'at'")
        cur.pos += 1
        if spec_tok.text == "poisson":
            rate_tok = cur.peek()
            value = cur.take_number("an arrival rate")
            if not (value > 0 and math.isfinite(value)):
                raise ParseError(
                    f"arrival rate must be finite and > 0, got {value}",
                    rate_tok.line,
                    rate_tok.col,
                )
            arrivals: PoissonArrivals | ScheduledArrivals = PoissonArrivals(value)
        elif spec_tok.text == "at":
            times = [cur.take_number("an arrival time")]
            while cur.peek() is not None and cur.peek().kind == "comma":
                cur.take("comma")
                times.append(cur.take_number("an arrival time"))
            if any(t < 0 or not math.isfinite(t) for t in times):
                raise ParseError("arrival times must be finite and >= 0", lineno, spec_tok.col)
            arrivals = ScheduledArrivals(tuple(times))
        else:
            raise ParseError(
                f"unknown arrival process {spec_tok.text!r}", spec_tok.line, spec_tok.col
            )
        cur.take_keyword("count")
        count_tok = cur.peek()
        count = cur.take_number("an entity count")
        if count != int(count) or count < 0:
            raise ParseError(
                f"count must be a non-negative integer, got {count}",
                count_tok.line,
                count_tok.col,
            )
        cur.take_keyword("horizon")
        horizon_tok = cur.peek()
        horizon = cur.take_number("a horizon")
        if not (math.isfinite(horizon) and horizon >= 0):
            raise ParseError(
                f"horizon must be finite and >= 0, got {horizon}",
                horizon_tok.line,
                horizon_tok.col,
            )
        cur.expect_end()
        if isinstance(arrivals, ScheduledArrivals) and len(arrivals.times) != int(count):
            raise ParseError(
                f"schedule lists {len(arrivals.times)} arrivals but count is {int(count)}",
                count_tok.line,
                count_tok.col,
            )
        scenario = Scenario(int(seed), classes, arrivals, int(count), horizon)
    if scenario is None:
        raise ParseError("no scenario statement found", max(1, len(lexer.lines)), 1)
    return scenario
