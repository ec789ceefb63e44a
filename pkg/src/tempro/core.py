"""Time discretization and piecewise-constant series arithmetic.

Every probability curve in this package is a step function over a uniform
grid of time cells.  Cell ``i`` (1-based, ``1 <= i <= omega``) covers the
half-open interval ``[origin + (i-1)*delta, origin + i*delta)``.  Event
curves hold a probability *density* per cell (probability per unit time);
fact curves hold a probability *mass* per cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Relative tolerance used to snap times sitting on a cell boundary, so that
# e.g. 0.3 / 0.1 lands in the cell starting at 0.3 rather than the one below.
_SNAP_REL = 1e-9


class GridError(ValueError):
    """Invalid grid construction or an operation across mismatched grids."""


class ResampleMismatchError(GridError):
    """A series cannot be replicated onto the requested finer grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of the projection window.

    origin: left edge of cell 1 (abstract time units).
    delta:  cell width, strictly positive.
    omega:  number of cells, at least 1.
    """

    origin: float
    delta: float
    omega: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise GridError(f"delta must be finite and > 0, got {self.delta!r}")
        if not (isinstance(self.omega, int) and self.omega >= 1):
            raise GridError(f"omega must be an integer >= 1, got {self.omega!r}")
        if not math.isfinite(self.origin):
            raise GridError(f"origin must be finite, got {self.origin!r}")

    @property
    def end(self) -> float:
        """Right edge of the last cell (exclusive)."""
        return self.origin + self.omega * self.delta

    def cell_start(self, i: int) -> float:
        return self.origin + (i - 1) * self.delta

    def cell_end(self, i: int) -> float:
        return self.origin + i * self.delta

    def cell_starts(self) -> np.ndarray:
        """Left edges of all cells, in cell order."""
        return self.origin + self.delta * np.arange(self.omega, dtype=float)

    def time_to_cell(self, t: float) -> int:
        """Index of the cell containing ``t`` (cells are left-closed).

        The result may fall outside ``1..omega`` for times outside the grid;
        callers decide whether that is an error.  Times within a tiny relative
        tolerance of a boundary are snapped onto it.
        """
        k = (t - self.origin) / self.delta
        nearest = round(k)
        if abs(k - nearest) <= _SNAP_REL * max(1.0, abs(k)):
            k = nearest
        return int(math.floor(k)) + 1

    def contains_cell(self, i: int) -> bool:
        return 1 <= i <= self.omega

    def refined(self, factor: int) -> "TimeGrid":
        """Grid over the same span with each cell split into ``factor`` parts."""
        if not (isinstance(factor, int) and factor >= 1):
            raise GridError(f"refinement factor must be an integer >= 1, got {factor!r}")
        return TimeGrid(self.origin, self.delta / factor, self.omega * factor)


@dataclass
class StepSeries:
    """A step function over a :class:`TimeGrid`: one value per cell.

    Used both for per-cell event densities and per-cell fact masses.  Values
    must be finite and non-negative.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.omega,):
            raise GridError(
                f"series length {self.values.shape} does not match omega={self.grid.omega}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")
        if np.any(self.values < 0):
            raise ValueError("series values must be non-negative")

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "StepSeries":
        return cls(grid, np.zeros(grid.omega))

    @classmethod
    def ones(cls, grid: TimeGrid) -> "StepSeries":
        return cls(grid, np.ones(grid.omega))

    def copy(self) -> "StepSeries":
        return StepSeries(self.grid, self.values.copy())

    def validate_as_mass(self, tol: float = 1e-9) -> None:
        """Check the per-cell probability-mass reading: every value in [0, 1]."""
        if np.any(self.values > 1.0 + tol):
            raise ValueError("mass series has values above 1")

    def validate_as_density(self, tol: float = 1e-9) -> None:
        """Check the density reading: total discrete integral at most 1."""
        if series_integral(self) > 1.0 + tol:
            raise ValueError("density series integrates to more than 1")


def series_integral(s: StepSeries, from_cell: int = 1, to_cell: int | None = None) -> float:
    """Discrete integral ``sum(values[i] * delta)`` over cells ``from_cell..to_cell``.

    Cell bounds are 1-based and inclusive; ``to_cell`` defaults to the last cell.
    """
    if to_cell is None:
        to_cell = s.grid.omega
    if not (1 <= from_cell <= to_cell <= s.grid.omega):
        raise ValueError(
            f"cell range {from_cell}..{to_cell} outside 1..{s.grid.omega}"
        )
    return float(np.sum(s.values[from_cell - 1 : to_cell]) * s.grid.delta)


def resample(s: StepSeries, finer: TimeGrid) -> StepSeries:
    """Replicate ``s`` onto a finer grid covering the same span.

    The finer cell width must divide the source width evenly and both grids
    must share origin and total span; each source value is replicated across
    its sub-cells, which preserves discrete integrals exactly.
    """
    src = s.grid
    ratio = src.delta / finer.delta
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > _SNAP_REL * factor:
        raise ResampleMismatchError(
            f"target delta {finer.delta} does not evenly divide source delta {src.delta}"
        )
    if abs(finer.origin - src.origin) > _SNAP_REL * max(1.0, abs(src.delta)):
        raise ResampleMismatchError(
            f"grids have different origins ({src.origin} vs {finer.origin})"
        )
    if finer.omega != src.omega * factor:
        raise ResampleMismatchError(
            f"target span ({finer.omega} cells of {finer.delta}) does not cover "
            f"source span ({src.omega} cells of {src.delta})"
        )
    return StepSeries(finer, np.repeat(s.values, factor))


def auto_mesh_factor(delta: float, window_widths: list[float]) -> int:
    """Subdivision factor so the working cell is at most half the smallest window.

    ``window_widths`` are the time spans of the input event windows.  Windows
    of zero width (point events) are exact at any mesh and are ignored.  When
    no positive width remains, the grid is left unrefined.
    """
    positive = [w for w in window_widths if w > 0]
    if not positive:
        return 1
    target = min(positive) / 2.0
    if target >= delta:
        return 1
    return math.ceil(delta / target - _SNAP_REL)
