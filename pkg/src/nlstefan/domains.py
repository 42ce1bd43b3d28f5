"""Initial phase regions and initial enthalpy profiles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .grid import Field, Grid

__all__ = ["Box", "Ball", "Shell", "Shape", "InitialData", "TabulatedInitial", "Initial"]

# points exactly on the boundary of a closed region count as inside
_EDGE_TOL = 1e-9


def _vec(x) -> tuple[float, ...]:
    return tuple(float(a) for a in np.atleast_1d(x))


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box (an interval in 1-D)."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", _vec(self.lower))
        object.__setattr__(self, "upper", _vec(self.upper))

    @property
    def dim(self):
        return len(self.lower)

    @property
    def center(self):
        return tuple(0.5 * (a + b) for a, b in zip(self.lower, self.upper))

    def contains(self, grid: Grid) -> np.ndarray:
        tol = _EDGE_TOL * grid.h
        inside = np.ones(grid.shape, dtype=bool)
        for x, a, b in zip(grid.coords(), self.lower, self.upper):
            inside &= (x >= a - tol) & (x <= b + tol)
        return inside

    def projection(self) -> tuple[float, float]:
        return self.lower[0], self.upper[0]

    @property
    def convex(self):
        return True


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, grid: Grid) -> np.ndarray:
        return grid.radius(self.center) <= self.radius + _EDGE_TOL * grid.h

    def projection(self):
        c = self.center[0]
        return c - self.radius, c + self.radius

    @property
    def convex(self):
        return True


@dataclass(frozen=True)
class Shell:
    """Closed spherical shell inner <= |x - center| <= outer."""

    center: tuple[float, ...]
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, grid: Grid) -> np.ndarray:
        r = grid.radius(self.center)
        tol = _EDGE_TOL * grid.h
        return (r >= self.inner - tol) & (r <= self.outer + tol)

    def projection(self):
        c = self.center[0]
        return c - self.outer, c + self.outer

    @property
    def convex(self):
        return self.inner <= 0


Shape = Union[Box, Ball, Shell]


@dataclass(frozen=True)
class InitialData:
    """gamma_0 = c0 on the region (or c0 / c1 split along x_1), exterior elsewhere.

    With ``c1`` set, cells with x_1 < ``split`` take c0 and the rest take c1;
    ``split`` defaults to the region's x_1 midpoint.
    """

    shape: Shape
    c0: float
    c1: float | None = None
    split: float | None = None

    @property
    def dim(self):
        return self.shape.dim

    def region(self, grid: Grid) -> np.ndarray:
        return self.shape.contains(grid)

    def values(self, grid: Grid, exterior: float) -> np.ndarray:
        inside = self.region(grid)
        v = np.full(grid.shape, float(exterior))
        if self.c1 is None:
            v[inside] = self.c0
        else:
            lo, hi = self.shape.projection()
            cut = 0.5 * (lo + hi) if self.split is None else self.split
            left = grid.coords()[0] < cut
            v[inside & left] = self.c0
            v[inside & ~left] = self.c1
        return v

    def field(self, grid: Grid, exterior: float) -> Field:
        return Field(grid, self.values(grid, exterior), exterior)

    def projection(self) -> tuple[float, float]:
        return self.shape.projection()


@dataclass(frozen=True, eq=False)
class TabulatedInitial:
    """Initial data read from a stored field; the region is where it differs from the exterior."""

    data: Field

    @property
    def dim(self):
        return self.data.grid.dim

    def _check(self, grid: Grid):
        if grid != self.data.grid:
            raise ValueError("tabulated initial data lives on a different grid")

    def region(self, grid: Grid) -> np.ndarray:
        self._check(grid)
        return self.data.values != self.data.exterior

    def values(self, grid: Grid, exterior: float) -> np.ndarray:
        self._check(grid)
        v = self.data.values.copy()
        v[~self.region(grid)] = exterior
        return v

    def field(self, grid: Grid, exterior: float) -> Field:
        return Field(grid, self.values(grid, exterior), exterior)

    def projection(self) -> tuple[float, float]:
        g = self.data.grid
        mask = self.region(g)
        idx = np.nonzero(mask.any(axis=tuple(range(1, g.dim))) if g.dim > 1 else mask)[0]
        x = g.axis(0)
        return float(x[idx.min()] - 0.5 * g.h), float(x[idx.max()] + 0.5 * g.h)


Initial = Union[InitialData, TabulatedInitial]
