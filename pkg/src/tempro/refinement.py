"""Probability refinement: the per-cell sweep that fills in every curve.

After projection has decided which tokens exist, refinement walks the grid
cell by cell and computes, for cell ``i``:

* the density of each derived onset event,
  ``density[i] = kappa * density[i](trigger) * prod_j mass[i](antecedent_j)``
  (independence of the enabling conditions), and
* the mass of each fact token from its initiating event's density and its
  persistence survivor.

For an exponential survivor with rate ``r`` the mass obeys the exact
recurrence ``mass[i] = exp(-r*delta) * mass[i-1] + density[i] * delta * c``
where ``c = (1 - exp(-r*delta)) / (r*delta)`` accounts for decay between an
occurrence inside cell ``i`` and the cell's end (``c = 1`` when ``r = 0``).
Linear survivors have no such recurrence and are evaluated by the direct
convolution sum instead.

Within one cell, antecedent masses must be computed before the densities
that consume them; the sweep recurses through each token's derivation to
enforce that, or (``order="topological"``) sorts the cell's open tokens
up front.  Both orders perform identical arithmetic per token.  When the
fact types open at a cell form a cycle in the theory's dependency relation,
no such order exists and :class:`CyclicOpenTokens` is raised.

A fact token *closes* at the first cell where its mass falls below
``epsilon`` after having reached ``epsilon``; from then on its mass is
pinned to zero and downstream products see 0.  ``epsilon=0`` disables
closure.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import StepSeries, TimeGrid
from .theory import CausalTheory, Exponential, Linear, Survivor, TypeKey, dependency_graph
from .tokens import FactToken, RuleDerived, TokenStore, init_vectors

logger = logging.getLogger(__name__)


class CyclicOpenTokens(RuntimeError):
    """The fact types open at one cell depend on each other cyclically."""

    def __init__(self, cell: int, cycle: list[TypeKey]):
        names = " -> ".join(f"{name}/{arity}" for name, arity in cycle)
        super().__init__(f"open tokens at cell {cell} form a dependency cycle: {names}")
        self.cell = cell
        self.cycle = cycle


@dataclass
class SweepStats:
    cells: int = 0
    clamped: int = 0  # mass values clipped into [0, 1]
    closures: int = 0


def within_cell_factor(rate: float, delta: float) -> float:
    """Average survival from a uniform occurrence time in a cell to its end.

    Equals ``(1 - exp(-rate*delta)) / (rate*delta)``, continuously extended
    to 1 at ``rate = 0`` and 0 at ``rate = inf``.
    """
    if rate == 0.0:
        return 1.0
    if math.isinf(rate):
        return 0.0
    return -math.expm1(-rate * delta) / (rate * delta)


def survivor_eval(survivor: Survivor, elapsed: float) -> float:
    """Probability that a fact still holds ``elapsed`` time after initiation."""
    if elapsed < 0:
        raise ValueError(f"elapsed time must be >= 0, got {elapsed}")
    if elapsed == 0:
        return 1.0
    if isinstance(survivor, Exponential):
        return math.exp(-survivor.rate * elapsed)
    return max(0.0, 1.0 - survivor.slope * elapsed)


def _term_matrix(f: StepSeries, rate: float) -> np.ndarray:
    """Contribution of source cell j (column) to evaluation cell k (row)
    under an exponential survivor, before any clipping."""
    grid = f.grid
    n = grid.omega
    delta = grid.delta
    idx = np.arange(n)
    elapsed = (idx[:, None] - idx[None, :]) * delta
    mask = elapsed >= 0
    if math.isinf(rate):
        return np.zeros((n, n))
    coef = delta * within_cell_factor(rate, delta)
    kernel = coef * np.exp(-rate * np.where(mask, elapsed, 0.0))
    return np.where(mask, f.values[None, :] * kernel, 0.0)


def convolve_direct(f: StepSeries, survivor: Survivor) -> StepSeries:
    """Direct (quadratic) evaluation of the persistence convolution.

    ``out[k] = sum_{j<=k} f[j] * delta * rho(j, k)`` where ``rho`` is the
    survivor evaluated from cell j's contribution to the end of cell k: for
    exponential survivors the exact per-cell kernel of the incremental
    recurrence, for linear survivors the midpoint weight
    ``max(0, 1 - slope*(k-j)*delta)``.  Serves as the independent reference
    for the sweep's fast path.
    """
    grid = f.grid
    if isinstance(survivor, Exponential):
        terms = _term_matrix(f, survivor.rate)
        return StepSeries(grid, terms.sum(axis=1))
    n = grid.omega
    delta = grid.delta
    idx = np.arange(n)
    elapsed = (idx[:, None] - idx[None, :]) * delta
    mask = elapsed >= 0
    slope = survivor.slope
    if math.isinf(slope):
        weight = np.where(elapsed == 0, 1.0, 0.0)
    else:
        weight = np.clip(1.0 - slope * np.where(mask, elapsed, 0.0), 0.0, None)
    terms = np.where(mask, f.values[None, :] * (delta * weight), 0.0)
    return StepSeries(grid, terms.sum(axis=1))


def clip(f: StepSeries, rate: float, g: StepSeries) -> StepSeries:
    """Exponential persistence of ``f`` clipped by annihilating events ``g``.

    Each contribution from cell j to cell k is scaled by
    ``max(0, 1 - integral(g, j..k))``, the probability that no annihilating
    event has occurred since the contribution.  With ``g = 0`` this equals
    ``convolve_direct(f, Exponential(rate))`` exactly; it never exceeds it.
    Note that mass clipped here is not returned to the unclipped curve, so
    overlapping windows double-count the annihilation; callers wanting exact
    semantics must keep ``g`` disjoint from surviving contributions.
    """
    grid = f.grid
    if g.grid != grid:
        raise ValueError("f and g must share a grid")
    n = grid.omega
    terms = _term_matrix(f, rate)
    cum = np.zeros(n + 1)
    np.cumsum(g.values * grid.delta, out=cum[1:])
    integral = cum[1:, None] - cum[None, :-1]  # integral of g over cells j..k
    bracket = np.clip(1.0 - integral, 0.0, None)
    return StepSeries(grid, (terms * bracket).sum(axis=1))


def density_update(store: TokenStore, token, i: int) -> float:
    """One cell of the derived-event density product; returns the new value.

    Reference implementation over token curves; the sweep inlines the same
    arithmetic.  Callers must have updated the trigger and antecedents at
    cell ``i`` already.
    """
    derivation = token.derivation
    if not isinstance(derivation, RuleDerived):
        raise ValueError("density_update applies to rule-derived event tokens")
    trigger = store.token(derivation.trigger)
    value = token.kappa * float(trigger.density.values[i - 1])
    for ant in derivation.antecedents:
        value *= float(store.token(ant).mass.values[i - 1])
    token.density.values[i - 1] = value
    return value


def mass_update_exp(store: TokenStore, token: FactToken, i: int) -> float:
    """One cell of the exponential-survivor mass recurrence; returns the value.

    Reference implementation over token curves; the sweep inlines the same
    arithmetic (without the clamp bookkeeping).
    """
    survivor = token.persistence
    if not isinstance(survivor, Exponential):
        raise ValueError("mass_update_exp applies to exponential-survivor facts")
    grid = token.mass.grid
    delta = grid.delta
    rate = survivor.rate
    decay = 0.0 if math.isinf(rate) else math.exp(-rate * delta)
    coef = delta * within_cell_factor(rate, delta)
    density = float(store.token(token.initiating_event).density.values[i - 1])
    prev = float(token.mass.values[i - 2]) if i >= 2 else 0.0
    value = min(1.0, decay * prev + density * coef)
    token.mass.values[i - 1] = value
    return value


def refine(
    store: TokenStore,
    theory: CausalTheory,
    grid: TimeGrid,
    epsilon: float = 1e-4,
    *,
    order: str = "recursive",
    trace: bool = False,
) -> TokenStore:
    """Run the full sweep over all cells, filling every token's curve.

    The store must already be projected.  Curves are (re)initialized on
    ``grid``, so refining twice is idempotent.  ``order`` selects how the
    within-cell dependencies are satisfied: ``"recursive"`` descends through
    each token's derivation on demand, ``"topological"`` pre-sorts the open
    tokens; both produce bit-identical curves on acyclic instances.
    """
    if order not in ("recursive", "topological"):
        raise ValueError(f"unknown update order {order!r}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    store.reset_sweep()
    init_vectors(store, grid)
    omega = grid.omega
    delta = grid.delta
    stats = SweepStats()
    graph = dependency_graph(theory)

    total = len(store.events) + len(store.facts)
    dens: list[list[float] | None] = [None] * total
    mass: list[list[float] | None] = [None] * total
    # Event metadata: None for user tokens (prefilled); else
    # (first_cell, last_cell, kappa, trigger_tid, antecedent_tids).
    emeta: list[tuple | None] = [None] * total
    # Fact metadata: None for the built-in token; else
    # (first_cell, init_tid, exponential?, decay, coef, slope, cutoff, type_key).
    fmeta: list[tuple | None] = [None] * total
    stamp = [0] * total
    in_progress = [False] * total
    had_support = [False] * total
    closed = [False] * total
    close_cell: list[int | None] = [None] * total

    event_ids = []
    for event in store.events:
        tid = event.tid
        dens[tid] = event.density.values.tolist()
        event_ids.append(tid)
        if isinstance(event.derivation, RuleDerived):
            first = max(1, grid.time_to_cell(event.est))
            last = min(omega, grid.time_to_cell(event.lst))
            emeta[tid] = (
                first,
                last,
                event.kappa,
                event.derivation.trigger,
                event.derivation.antecedents,
            )

    fact_ids = []
    opens_at: dict[int, list[int]] = {}
    for fact in store.facts:
        tid = fact.tid
        mass[tid] = fact.mass.values.tolist()
        fact_ids.append(tid)
        if fact.is_builtin:
            continue
        first = max(1, grid.time_to_cell(fact.est))
        survivor = fact.persistence
        if isinstance(survivor, Exponential):
            rate = survivor.rate
            decay = 0.0 if math.isinf(rate) else math.exp(-rate * delta)
            coef = delta * within_cell_factor(rate, delta)
            fmeta[tid] = (first, fact.initiating_event, True, decay, coef, 0.0, 0, fact.fact_type.key)
        else:
            slope = survivor.slope
            if slope <= 0.0:
                cutoff = omega  # never expires within the grid
            elif math.isinf(slope):
                cutoff = 0
            else:
                cutoff = min(omega, int(math.floor(1.0 / (slope * delta))) + 1)
            fmeta[tid] = (first, fact.initiating_event, False, 0.0, 0.0, slope, cutoff, fact.fact_type.key)
        if first <= omega:
            opens_at.setdefault(first, []).append(tid)

    open_counts: dict[TypeKey, int] = {}
    open_set_changed = False

    def check_open_types(cell: int) -> None:
        open_keys = {key for key, count in open_counts.items() if count > 0}
        cycle = graph.find_cycle(within=open_keys)
        if cycle is not None:
            raise CyclicOpenTokens(cell, cycle)

    def update_event(tid: int, i: int, meta: tuple) -> None:
        first, last, kappa, trig, ants = meta
        if i < first or i > last:
            return
        value = kappa * dens[trig][i - 1]
        for ant in ants:
            value *= mass[ant][i - 1]
        dens[tid][i - 1] = value
        if trace:
            logger.debug("cell %d: density[%d] = %.12g", i, tid, value)

    def update_fact(tid: int, i: int, meta: tuple) -> None:
        nonlocal open_set_changed
        first, init_tid, is_exp, decay, coef, slope, cutoff, key = meta
        if closed[tid] or i < first:
            return
        arr = mass[tid]
        if is_exp:
            prev = arr[i - 2] if i >= 2 else 0.0
            value = decay * prev + dens[init_tid][i - 1] * coef
        else:
            src = dens[init_tid]
            lo = max(first, i - cutoff)
            value = 0.0
            for j in range(lo, i + 1):
                weight = 1.0 - slope * (i - j) * delta
                if weight > 0.0:
                    value += src[j - 1] * delta * weight
        if value > 1.0:
            value = 1.0
            stats.clamped += 1
        arr[i - 1] = value
        if trace:
            logger.debug("cell %d: mass[%d] = %.12g", i, tid, value)
        if epsilon > 0.0:
            if value >= epsilon:
                had_support[tid] = True
            elif had_support[tid]:
                closed[tid] = True
                close_cell[tid] = i
                stats.closures += 1
                open_counts[key] -= 1
                open_set_changed = True
                if trace:
                    logger.debug("cell %d: token %d closed", i, tid)

    def ensure_event(tid: int, i: int) -> None:
        if stamp[tid] == i:
            return
        stamp[tid] = i
        meta = emeta[tid]
        if meta is None:
            return  # user-supplied density is prefilled
        if in_progress[tid]:
            raise CyclicOpenTokens(i, [store.token(tid).event_type.key])
        in_progress[tid] = True
        ensure_event(meta[3], i)
        for ant in meta[4]:
            ensure_fact(ant, i)
        in_progress[tid] = False
        update_event(tid, i, meta)

    def ensure_fact(tid: int, i: int) -> None:
        if stamp[tid] == i:
            return
        stamp[tid] = i
        meta = fmeta[tid]
        if meta is None:
            return  # built-in ALWAYS mass is prefilled
        if in_progress[tid]:
            raise CyclicOpenTokens(i, [store.token(tid).fact_type.key])
        in_progress[tid] = True
        ensure_event(meta[1], i)
        in_progress[tid] = False
        update_fact(tid, i, meta)

    def topological_cell(i: int) -> None:
        """Update the cell's open tokens in a dependency-sorted order."""
        nodes: list[int] = []
        for tid in event_ids:
            meta = emeta[tid]
            if meta is not None and meta[0] <= i <= meta[1]:
                nodes.append(tid)
        for tid in fact_ids:
            meta = fmeta[tid]
            if meta is not None and meta[0] <= i and not closed[tid]:
                nodes.append(tid)
        node_set = set(nodes)
        deps: dict[int, list[int]] = {}
        indegree = {tid: 0 for tid in nodes}
        for tid in nodes:
            meta = emeta[tid]
            wanted = [meta[3], *meta[4]] if meta is not None else [fmeta[tid][1]]
            for dep in wanted:
                if dep in node_set:
                    deps.setdefault(dep, []).append(tid)
                    indegree[tid] += 1
        ready = [tid for tid in nodes if indegree[tid] == 0]
        heapq.heapify(ready)
        done = 0
        while ready:
            tid = heapq.heappop(ready)
            done += 1
            stamp[tid] = i
            meta = emeta[tid]
            if meta is not None:
                update_event(tid, i, meta)
            else:
                update_fact(tid, i, fmeta[tid])
            for succ in deps.get(tid, ()):
                indegree[succ] -= 1
                if indegree[succ] == 0:
                    heapq.heappush(ready, succ)
        if done != len(nodes):
            keys = []
            for tid in nodes:
                if stamp[tid] != i:
                    token = store.token(tid)
                    keys.append(
                        token.event_type.key
                        if emeta[tid] is not None
                        else token.fact_type.key
                    )
            raise CyclicOpenTokens(i, keys)

    recursive = order == "recursive"
    for i in range(1, omega + 1):
        stats.cells += 1
        for tid in opens_at.get(i, ()):
            key = fmeta[tid][7]
            open_counts[key] = open_counts.get(key, 0) + 1
            open_set_changed = True
        if open_set_changed:
            open_set_changed = False
            check_open_types(i)
        if recursive:
            for tid in event_ids:
                ensure_event(tid, i)
            for tid in fact_ids:
                ensure_fact(tid, i)
        else:
            topological_cell(i)

    for event in store.events:
        if not event.is_user:
            event.density = StepSeries(grid, np.asarray(dens[event.tid]))
    for fact in store.facts:
        if not fact.is_builtin:
            fact.mass = StepSeries(grid, np.asarray(mass[fact.tid]))
        fact.closed = closed[fact.tid]
        fact.close_cell = close_cell[fact.tid]
    store.sweep_stats = stats
    return store
