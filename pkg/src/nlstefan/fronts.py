"""Phase-set bookkeeping: components, first-touch times, jumps, enclosing radius."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import Field, Grid

__all__ = [
    "components",
    "interior",
    "enclosing_radius",
    "new_components",
    "Jump",
    "FrontTrace",
    "FrontTracker",
]


def _structure(dim: int):
    # face adjacency only
    return ndimage.generate_binary_structure(dim, 1)


def components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask, structure=_structure(mask.ndim))
    return labels, int(count)


def interior(mask: np.ndarray) -> np.ndarray:
    """Mask cells whose face neighbours are all in the mask (box edge counts as outside)."""
    return ndimage.binary_erosion(mask, structure=_structure(mask.ndim), border_value=0)


def enclosing_radius(mask: np.ndarray, grid: Grid, center=None) -> float:
    """Largest distance from ``center`` to a mask cell centre (0 for an empty mask)."""
    if not mask.any():
        return 0.0
    return float(grid.radius(center)[mask].max())


def new_components(prev: np.ndarray, mask: np.ndarray) -> list[np.ndarray]:
    """Components of ``mask`` that share no cell with ``prev``."""
    labels, count = components(mask)
    if count == 0:
        return []
    touched = np.unique(labels[prev & mask])
    fresh = np.setdiff1d(np.arange(1, count + 1), touched)
    return [labels == k for k in fresh]


@dataclass
class Jump:
    step: int
    t: float
    cells: list[np.ndarray]

    def coordinates(self, grid: Grid) -> list[np.ndarray]:
        pts = grid.points()
        return [pts[c] for c in self.cells]


@dataclass
class FrontTrace:
    times: list[float] = field(default_factory=list)
    measure: list[float] = field(default_factory=list)
    component_counts: list[int] = field(default_factory=list)
    enclosing_radius: list[float] = field(default_factory=list)
    masks: list[tuple[float, np.ndarray]] = field(default_factory=list)
    first_touch: Field | None = None
    jumps: list[Jump] = field(default_factory=list)
    monotone: bool = True

    def rows(self):
        return list(zip(self.times, self.measure, self.component_counts, self.enclosing_radius))


class FrontTracker:
    """Online tracker for the set {sense * (gamma - level) >= 0}.

    First-touch times are linearly interpolated in time between the two
    bracketing steps; cells already in the set at the start get time 0.
    """

    def __init__(self, grid: Grid, level: float = 0.0, sense: int = 1, center=None, mask_every: int = 1):
        self.grid = grid
        self.level = float(level)
        self.sense = 1 if sense >= 0 else -1
        self.center = center
        self.mask_every = max(int(mask_every), 1)
        self.trace = FrontTrace()
        self._prev: np.ndarray | None = None
        self._touch = np.full(grid.shape, np.nan)
        self._steps = 0
        self._radius = grid.radius(center)

    def indicator(self, values: np.ndarray) -> np.ndarray:
        return self.sense * (values - self.level)

    def start(self, t: float, values: np.ndarray) -> None:
        mask = self.indicator(values) >= 0
        self._touch[mask] = t
        self._record(t, mask, force_mask=True)
        self._prev = mask

    def update(self, t_prev: float, t: float, prev_values: np.ndarray, values: np.ndarray, force_mask=False):
        """Register a step; returns the list of freshly nucleated components."""
        self._steps += 1
        g_new = self.indicator(values)
        mask = g_new >= 0
        fresh = mask & np.isnan(self._touch)
        if fresh.any():
            g_old = self.indicator(prev_values[fresh])
            gn = g_new[fresh]
            frac = np.where(gn > g_old, -g_old / np.where(gn > g_old, gn - g_old, 1.0), 1.0)
            self._touch[fresh] = t_prev + np.clip(frac, 0.0, 1.0) * (t - t_prev)
        if np.any(self._prev & ~mask):
            self.trace.monotone = False
        born = new_components(self._prev, mask) if fresh.any() else []
        if born:
            self.trace.jumps.append(Jump(self._steps, t, born))
        self._record(t, mask, force_mask or self._steps % self.mask_every == 0)
        self._prev = mask
        return born

    def _record(self, t, mask, force_mask):
        tr = self.trace
        tr.times.append(float(t))
        tr.measure.append(float(mask.sum() * self.grid.cell_volume))
        tr.component_counts.append(components(mask)[1])
        tr.enclosing_radius.append(float(self._radius[mask].max()) if mask.any() else 0.0)
        if force_mask:
            tr.masks.append((float(t), mask.copy()))

    @property
    def mask(self) -> np.ndarray:
        return self._prev

    def finish(self) -> FrontTrace:
        # NaN marks cells never reached; the exterior slot is unused for this field
        self.trace.first_touch = Field(self.grid, self._touch.copy(), 0.0)
        return self.trace
