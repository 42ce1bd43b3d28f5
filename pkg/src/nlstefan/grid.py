"""Uniform cell-centred grids, grid fields and the discrete convolution engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .errors import DegenerateBox, KernelWiderThanGrid
from .kernels import Kernel

__all__ = [
    "Grid",
    "Field",
    "DiscreteKernel",
    "build_grid",
    "sample_kernel",
    "Convolver",
    "convolve",
    "integrate",
    "lp_norm",
    "positive_part",
    "shifted_excess",
    "shift_l1",
]


@dataclass(frozen=True)
class Grid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    h: float
    counts: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def axis(self, k: int) -> np.ndarray:
        """Cell-centre coordinates along axis k."""
        return self.lower[k] + self.h * (np.arange(self.counts[k]) + 0.5)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        return np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij", sparse=True)

    def points(self) -> np.ndarray:
        """All cell centres as an array of shape counts + (dim,)."""
        mesh = np.meshgrid(*(self.axis(k) for k in range(self.dim)), indexing="ij")
        return np.stack(mesh, axis=-1)

    def radius(self, center: Sequence[float] | None = None) -> np.ndarray:
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        return np.sqrt(sum((x - ck) ** 2 for x, ck in zip(self.coords(), c)))

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing point x (clipped to the grid)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.floor((x - np.asarray(self.lower)) / self.h).astype(int)
        return tuple(int(min(max(i, 0), n - 1)) for i, n in zip(idx, self.counts))


def build_grid(lower: Sequence[float], upper: Sequence[float], h: float) -> Grid:
    """Cell-centred grid covering [lower, upper]; counts rounded up, upper moved out."""
    lower = tuple(float(a) for a in np.atleast_1d(lower))
    upper = tuple(float(b) for b in np.atleast_1d(upper))
    if len(lower) != len(upper) or not lower:
        raise DegenerateBox("corner dimensions differ")
    if not (h > 0 and math.isfinite(h)):
        raise DegenerateBox(f"spacing must be positive, got {h}")
    counts = []
    for a, b in zip(lower, upper):
        if not b > a:
            raise DegenerateBox(f"empty interval [{a}, {b}]")
        counts.append(max(int(math.ceil((b - a) / h - 1e-9)), 1))
    if min(counts) < 4:
        raise DegenerateBox(f"need at least 4 cells per axis, got {counts}")
    upper = tuple(a + c * h for a, c in zip(lower, counts))
    return Grid(lower, upper, float(h), tuple(counts))


@dataclass(eq=False)
class Field:
    """Cell-centred samples plus the constant value assumed outside the box."""

    grid: Grid
    values: np.ndarray
    exterior: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        self.values = v.reshape(self.grid.shape)
        self.exterior = float(self.exterior)
        if not math.isfinite(self.exterior):
            raise ValueError("exterior value must be finite")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.exterior)

    def with_values(self, values, exterior=None) -> "Field":
        return Field(self.grid, values, self.exterior if exterior is None else exterior)

    @classmethod
    def constant(cls, grid: Grid, value: float, exterior: float | None = None) -> "Field":
        ext = value if exterior is None else exterior
        return cls(grid, np.full(grid.shape, float(value)), ext)


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Stencil weights on offsets -radii..radii; ``stencil[r + z]`` is w_z."""

    stencil: np.ndarray
    h: float

    def __post_init__(self):
        s = np.asarray(self.stencil, dtype=float)
        if any(n % 2 == 0 for n in s.shape):
            raise ValueError("stencil must have odd extent on every axis")
        if np.any(s < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "stencil", s / s.sum())

    @property
    def dim(self) -> int:
        return self.stencil.ndim

    @property
    def radii(self) -> tuple[int, ...]:
        return tuple((n - 1) // 2 for n in self.stencil.shape)

    @property
    def radius_cells(self) -> int:
        return max(self.radii)

    @property
    def offsets(self) -> np.ndarray:
        """Nonzero-weight offsets, sorted lexicographically."""
        idx = np.argwhere(self.stencil > 0)
        return idx - np.asarray(self.radii)

    @property
    def weights(self) -> np.ndarray:
        return self.stencil[self.stencil > 0]

    def moment(self, order: Sequence[int]) -> float:
        """Discrete moment sum_z w_z prod (z_k h)^order_k."""
        out = self.stencil.copy()
        for k, p in enumerate(order):
            r = self.radii[k]
            z = (np.arange(-r, r + 1) * self.h) ** p
            shape = [1] * self.dim
            shape[k] = -1
            out = out * z.reshape(shape)
        return float(out.sum())


def _cell_masses_1d(kernel: Kernel, h: float, r: int) -> np.ndarray:
    edges = (np.arange(-r, r + 2) - 0.5) * h
    F = kernel.cdf(edges)
    return np.clip(np.diff(F), 0, None)


def _cell_masses(kernel: Kernel, h: float, radii: Sequence[int], supersample: int) -> np.ndarray:
    from .kernels import Mixture

    if isinstance(kernel, Mixture):
        return sum(w * _cell_masses(c, h, radii, supersample) for w, c in zip(kernel.weights, kernel.components))
    if kernel.dim == 1:
        try:
            return _cell_masses_1d(kernel, h, radii[0])
        except NotImplementedError:
            pass
    factors = kernel.factors()
    if factors is not None:
        try:
            parts = [_cell_masses_1d(f, h, r) for f, r in zip(factors, radii)]
        except NotImplementedError:
            parts = None
        if parts is not None:
            out = parts[0]
            for p in parts[1:]:
                out = np.multiply.outer(out, p)
            return out
    # midpoint rule on an s^n sub-lattice of every cell
    s = supersample
    sub = (np.arange(s) + 0.5) / s - 0.5
    axes = [np.add.outer(np.arange(-r, r + 1), sub).ravel() * h for r in radii]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    dens = kernel.density(mesh)
    shape = []
    for r in radii:
        shape += [2 * r + 1, s]
    dens = dens.reshape(shape)
    return dens.mean(axis=tuple(range(1, 2 * len(radii), 2))) * h ** len(radii)


def _trim(stencil: np.ndarray) -> np.ndarray:
    """Drop all-zero outer shells, keeping the stencil symmetric per axis."""
    for k in range(stencil.ndim):
        other = tuple(j for j in range(stencil.ndim) if j != k)
        nz = np.nonzero(stencil.sum(axis=other) if other else stencil)[0]
        r = (stencil.shape[k] - 1) // 2
        keep = int(np.max(np.abs(nz - r))) if nz.size else 0
        sl = [slice(None)] * stencil.ndim
        sl[k] = slice(r - keep, r + keep + 1)
        stencil = stencil[tuple(sl)]
    return stencil


def sample_kernel(
    kernel: Kernel,
    grid: Grid | float,
    tail_tol: float = 1e-12,
    supersample: int = 4,
) -> DiscreteKernel:
    """Discretize a kernel as cell masses w_z = int_{cell z} k, renormalized to sum 1.

    Cell masses are exact for 1-D kernels and tensor-product kernels (via the
    CDF) and use an s^n midpoint sub-lattice otherwise.  Unbounded kernels are
    truncated at the box that misses less than ``tail_tol`` of the mass.
    """
    h = grid.h if isinstance(grid, Grid) else float(grid)
    ext = kernel.extent(tail_tol)
    # cells whose interval meets [-e, e]
    radii = [max(int(math.ceil(e / h + 0.5)) - 1, 0) for e in ext]
    stencil = _trim(_cell_masses(kernel, h, radii, supersample))
    dk = DiscreteKernel(stencil, h)
    if isinstance(grid, Grid) and any(r >= n for r, n in zip(dk.radii, grid.counts)):
        raise KernelWiderThanGrid(f"kernel radius {dk.radii} cells exceeds grid counts {grid.counts}")
    return dk


class Convolver:
    """Repeated convolution of fields on one grid with one discrete kernel.

    ``method`` is 'direct' (shifted-slice sum over offsets in sorted order),
    'fft' (zero-padded real FFT with a cached kernel transform) or 'auto'.
    Samples outside the box take the field's exterior value; the FFT path
    handles them exactly by convolving f - exterior and adding the exterior
    back, which relies on the unit mass of the stencil.
    """

    def __init__(self, grid: Grid, kernel: DiscreteKernel, method: str = "auto"):
        if kernel.dim != grid.dim:
            raise ValueError("kernel and grid dimensions differ")
        if any(r >= n for r, n in zip(kernel.radii, grid.counts)):
            raise KernelWiderThanGrid(f"kernel radius {kernel.radii} cells exceeds grid counts {grid.counts}")
        if method == "auto":
            nnz = int(np.count_nonzero(kernel.stencil))
            method = "direct" if nnz <= 64 or nnz * grid.size <= 2_000_000 else "fft"
        if method not in ("direct", "fft"):
            raise ValueError(f"unknown convolution method {method!r}")
        self.grid = grid
        self.kernel = kernel
        self.method = method
        self._offsets = kernel.offsets
        self._weights = kernel.weights
        if method == "fft":
            self._fft_shape = tuple(
                sfft.next_fast_len(n + 2 * r, real=True) for n, r in zip(grid.counts, kernel.radii)
            )
            self._khat = sfft.rfftn(kernel.stencil, self._fft_shape)

    def __call__(self, values: np.ndarray, exterior: float = 0.0) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(self.grid.shape)
        if self.method == "direct":
            out = self._direct(values, exterior)
        else:
            out = self._fft(values, exterior)
        if exterior >= 0 and self.method == "fft" and values.min(initial=0.0) >= 0:
            np.maximum(out, 0.0, out=out)
        return out

    def _direct(self, values, exterior):
        radii = self.kernel.radii
        padded = np.pad(values, [(r, r) for r in radii], constant_values=exterior)
        out = np.zeros(self.grid.shape)
        n = self.grid.counts
        for z, w in zip(self._offsets, self._weights):
            # out[i] += w * f[i - z]  ->  padded index i - z + r
            sl = tuple(slice(r - zk, r - zk + nk) for r, zk, nk in zip(radii, z, n))
            out += w * padded[sl]
        return out

    def _fft(self, values, exterior):
        x = values - exterior if exterior else values
        c = sfft.irfftn(sfft.rfftn(x, self._fft_shape) * self._khat, self._fft_shape)
        sl = tuple(slice(r, r + n) for r, n in zip(self.kernel.radii, self.grid.counts))
        out = c[sl]
        if exterior:
            out = out + exterior
        return np.ascontiguousarray(out)


def convolve(f: Field, kernel: DiscreteKernel, mode: str = "fft", use_exterior: bool = True) -> Field:
    """Return K*f as a Field; outside samples are f.exterior or 0 (``use_exterior=False``)."""
    ext = f.exterior if use_exterior else 0.0
    out = Convolver(f.grid, kernel, mode)(f.values, ext)
    return Field(f.grid, out, ext)


def integrate(f: Field) -> float:
    """h^n times the sum of the interior samples."""
    return float(f.values.sum() * f.grid.cell_volume)


def lp_norm(f: Field, p: float = 1) -> float:
    """Discrete L^p norm over the box (interior samples only)."""
    v = np.abs(f.values)
    if p == math.inf or p == "inf":
        return float(v.max(initial=0.0))
    if p == 1:
        return float(v.sum() * f.grid.cell_volume)
    return float((np.sum(v**p) * f.grid.cell_volume) ** (1.0 / p))


def positive_part(f: Field) -> Field:
    return Field(f.grid, np.maximum(f.values, 0.0), max(f.exterior, 0.0))


def shifted_excess(f: Field, ell0: float) -> Field:
    """(f + ell0)^- = min(f + ell0, 0), with the same rule for the exterior."""
    return Field(f.grid, np.minimum(f.values + ell0, 0.0), min(f.exterior + ell0, 0.0))


def shift_l1(f: Field, shift: Sequence[int]) -> float:
    """||f(. + z h) - f||_1 over all of R^n, the field extended by its exterior value."""
    shift = [int(s) for s in np.atleast_1d(shift)]
    pad = [(abs(s), abs(s)) for s in shift]
    p = np.pad(f.values, pad, constant_values=f.exterior)
    q = np.roll(p, [-s for s in shift], axis=tuple(range(p.ndim)))
    # rolled-in entries wrap around; they sit in the exterior band, so replace them
    for k, s in enumerate(shift):
        if s:
            sl = [slice(None)] * p.ndim
            sl[k] = slice(-s, None) if s > 0 else slice(None, -s)
            q[tuple(sl)] = f.exterior
    return float(np.abs(q - p).sum() * f.grid.cell_volume)
