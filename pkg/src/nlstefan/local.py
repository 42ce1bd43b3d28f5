"""Reference solvers for the local limits and the transforms linking them.

* ``solve_enthalpy_local``: explicit enthalpy scheme gamma_t = Lap u(gamma)
  for the two-phase local Stefan problem.
* ``solve_obstacle_vi``: implicit Euler + projected Gauss-Seidel for the
  parabolic obstacle problem v_t - A Lap v >= f, v >= 0, with complementarity.
* ``v_transform`` / ``f_transform``: time-integrated liquid enthalpy and the
  matching right-hand side, built from a nonlocal one-phase run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domains import Initial
from .errors import CflViolation, MaxSweepsExceeded, ValidationError
from .grid import Field, Grid, build_grid, lp_norm
from .onephase import _tuple, first_touch_times
from .twophase import enthalpy_transform

__all__ = [
    "LocalConfig",
    "LocalResult",
    "solve_enthalpy_local",
    "solve_obstacle_vi",
    "laplacian",
    "v_transform",
    "f_transform",
    "ErrorTable",
    "convergence_metric",
]


@dataclass
class LocalConfig:
    A: float
    initial: Initial
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    h: float
    B: float = 1.0
    ell0: float = 1.0
    exterior: float | None = None
    dt: float | None = None
    t_end: float = 1.0
    snapshot_every: int = 10
    vi_tolerance: float = 1e-10
    max_sweeps: int = 20000
    boundary: str = "dirichlet"

    def __post_init__(self):
        self.lower = _tuple(self.lower)
        self.upper = _tuple(self.upper)
        if self.exterior is None:
            self.exterior = -self.ell0
        if self.dt is None:
            self.dt = 0.5 * self.cfl_limit
        self.validate()

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def cfl_limit(self) -> float:
        """Largest explicit step: dt * max(A, B) * 2n / h^2 <= 1."""
        return self.h**2 / (2 * self.dim * max(self.A, self.B))

    def validate(self):
        for name in ("A", "B", "ell0", "h", "dt", "vi_tolerance"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, f"{name} > 0")
        if self.boundary not in ("dirichlet", "periodic"):
            raise ValidationError("boundary", "boundary in {dirichlet, periodic}")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps", "max_sweeps >= 1")


@dataclass
class LocalResult:
    snapshots: list[tuple[float, Field]]
    u_snapshots: list[tuple[float, Field]]
    sweeps: list[int]
    residuals: list[float]


def laplacian(values: np.ndarray, h: float, exterior: float = 0.0, periodic: bool = False) -> np.ndarray:
    """Standard (2n+1)-point Laplacian with a constant Dirichlet value or periodic wrap."""
    out = -2 * values.ndim * values
    for k in range(values.ndim):
        if periodic:
            out = out + np.roll(values, 1, axis=k) + np.roll(values, -1, axis=k)
        else:
            pad = [(0, 0)] * values.ndim
            pad[k] = (1, 1)
            p = np.pad(values, pad, constant_values=exterior)
            lo = [slice(None)] * values.ndim
            hi = [slice(None)] * values.ndim
            lo[k] = slice(0, -2)
            hi[k] = slice(2, None)
            out = out + p[tuple(lo)] + p[tuple(hi)]
    return out / h**2


def _n_steps(t_end, dt):
    return int(round(t_end / dt))


def solve_enthalpy_local(config: LocalConfig) -> LocalResult:
    """Explicit enthalpy scheme gamma <- gamma + dt Lap_h u(gamma); u already carries A and B."""
    c = config
    if c.dt > c.cfl_limit * (1 + 1e-12):
        raise CflViolation(f"dt={c.dt} exceeds the explicit limit {c.cfl_limit}")
    grid = build_grid(c.lower, c.upper, c.h)
    gamma = c.initial.values(grid, c.exterior)
    u_ext = float(enthalpy_transform(np.array(c.exterior), c.A, c.B, c.ell0))
    periodic = c.boundary == "periodic"

    def record(t, g):
        snaps.append((t, Field(grid, g.copy(), c.exterior)))
        u_snaps.append((t, Field(grid, enthalpy_transform(g, c.A, c.B, c.ell0), u_ext)))

    snaps, u_snaps = [], []
    record(0.0, gamma)
    n = _n_steps(c.t_end, c.dt)
    for m in range(1, n + 1):
        u = enthalpy_transform(gamma, c.A, c.B, c.ell0)
        gamma = gamma + c.dt * laplacian(u, c.h, u_ext, periodic)
        if m % c.snapshot_every == 0 or m == n:
            record(m * c.dt, gamma)
    return LocalResult(snaps, u_snaps, [], [])


@numba.njit(cache=True)
def _pgs(v, rhs, interior, strides, r, diag, tol, max_sweeps, omega):
    """Projected Gauss-Seidel on a ghost-padded flat array; returns (sweeps, residual)."""
    nd = strides.shape[0]
    res = 0.0
    for sweep in range(1, max_sweeps + 1):
        for idx in interior:
            s = 0.0
            for k in range(nd):
                s += v[idx + strides[k]] + v[idx - strides[k]]
            gs = (rhs[idx] + r * s) / diag
            val = v[idx] + omega * (gs - v[idx])
            v[idx] = val if val > 0.0 else 0.0
        # complementarity residual min(v, scaled linear residual)
        res = 0.0
        for idx in interior:
            s = 0.0
            for k in range(nd):
                s += v[idx + strides[k]] + v[idx - strides[k]]
            lin = (diag * v[idx] - r * s - rhs[idx]) / diag
            m = v[idx] if v[idx] < lin else lin
            if abs(m) > res:
                res = abs(m)
        if res <= tol:
            return sweep, res
    return max_sweeps + 1, res


def solve_obstacle_vi(config: LocalConfig, omega: float = 1.0) -> LocalResult:
    """Implicit Euler for v_t - A Lap v >= f, v >= 0, complementarity; v(0) = 0, f = gamma_0.

    Each step solves min(v, (1 + 2n r) v - r sum_nbr v - v_prev - dt f) = 0 with
    r = dt A / h^2 by projected Gauss-Seidel in row-major order; v = 0 outside
    the box.
    """
    c = config
    grid = build_grid(c.lower, c.upper, c.h)
    f = c.initial.values(grid, c.exterior)
    shape = tuple(n + 2 for n in grid.shape)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(grid.dim)], dtype=np.int64)
    inner = np.zeros(shape, dtype=bool)
    inner[tuple(slice(1, -1) for _ in shape)] = True
    interior = np.flatnonzero(inner).astype(np.int64)
    r = c.dt * c.A / c.h**2
    diag = 1 + 2 * grid.dim * r

    v = np.zeros(int(np.prod(shape)))
    rhs = np.zeros_like(v)
    f_flat = np.zeros_like(v)
    f_flat[interior] = f.ravel()
    snaps = [(0.0, Field(grid, np.zeros(grid.shape), 0.0))]
    sweeps, residuals = [], []
    n = _n_steps(c.t_end, c.dt)
    for m in range(1, n + 1):
        rhs[:] = v + c.dt * f_flat
        k, res = _pgs(v, rhs, interior, strides, r, diag, c.vi_tolerance, c.max_sweeps, omega)
        if k > c.max_sweeps:
            raise MaxSweepsExceeded(f"residual {res:.3g} after {c.max_sweeps} sweeps at step {m}")
        sweeps.append(int(k))
        residuals.append(float(res))
        if m % c.snapshot_every == 0 or m == n:
            snaps.append((m * c.dt, Field(grid, v[interior].reshape(grid.shape).copy(), 0.0)))
    return LocalResult(snaps, [], sweeps, residuals)


def v_transform(snapshots: Sequence[tuple[float, Field]], rule: str = "trapezoid") -> list[tuple[float, Field]]:
    """v(t) = int_0^t gamma^+ dtau per cell, accumulated over the stored snapshots.

    ``rule='left'`` matches forward Euler exactly (v^{m+1} = v^m + dt gamma^{+,m}).
    """
    t0, f0 = snapshots[0]
    acc = np.zeros(f0.grid.shape)
    out = [(t0, Field(f0.grid, acc.copy(), 0.0))]
    prev_t, prev = t0, np.maximum(f0.values, 0.0)
    for t, f in snapshots[1:]:
        cur = np.maximum(f.values, 0.0)
        dt = t - prev_t
        acc = acc + (dt * prev if rule == "left" else 0.5 * dt * (prev + cur))
        out.append((t, Field(f0.grid, acc.copy(), 0.0)))
        prev_t, prev = t, cur
    return out


def f_transform(snapshots: Sequence[tuple[float, Field]], problem, first_touch: Field | None = None
                ) -> list[tuple[float, Field]]:
    """Right-hand side f_eps(t, x) of the equation satisfied by v_eps.

    gamma_0 on the initial region; -(d/eps^2) K_eps * v_eps before the first
    touch s_eps(x); -ell0 afterwards.  Needs snapshots at every step; the
    left rule for v keeps the middle branch equal to -(gamma + ell0) exactly.
    """
    grid = snapshots[0][1].grid
    region = problem.config.initial.region(grid)
    g0 = snapshots[0][1].values
    ell0 = problem.config.ell0
    s = (first_touch if first_touch is not None else first_touch_times(list(snapshots))).values
    out = []
    for t, v in v_transform(snapshots, rule="left"):
        mid = -problem.rate * problem.conv(v.values, 0.0)
        touched = ~np.isnan(s) & (s < t)
        f = np.where(touched, -ell0, mid)
        f[region] = g0[region]
        out.append((t, Field(grid, f, -ell0)))
    return out


@dataclass
class ErrorTable:
    rows: list[tuple[float, float]]

    @property
    def max_error(self) -> float:
        return max((e for _, e in self.rows), default=0.0)


def _sample(field: Field, grid: Grid) -> np.ndarray:
    if field.grid == grid:
        return field.values
    axes = [field.grid.axis(k) for k in range(field.grid.dim)]
    interp = RegularGridInterpolator(axes, field.values, bounds_error=False, fill_value=field.exterior)
    return interp(grid.points())


def convergence_metric(
    approx: Sequence[tuple[float, Field]],
    reference: Sequence[tuple[float, Field]],
    times: Sequence[float] | None = None,
) -> ErrorTable:
    """L^1 distance over the box between two trajectories at common times.

    The reference is linearly interpolated in time (and in space when grids
    differ) onto the approximation's snapshots; ``times`` restricts the rows.
    """
    ref_t = np.array([t for t, _ in reference])
    rows = []
    for t, f in approx:
        if times is not None and not np.any(np.isclose(times, t, rtol=0, atol=1e-12)):
            continue
        if t < ref_t[0] - 1e-12 or t > ref_t[-1] + 1e-12:
            continue
        j = int(np.clip(np.searchsorted(ref_t, t), 1, len(ref_t) - 1))
        ta, tb = ref_t[j - 1], ref_t[j]
        w = 0.0 if tb == ta else min(max((t - ta) / (tb - ta), 0.0), 1.0)
        ra = _sample(reference[j - 1][1], f.grid)
        rb = _sample(reference[j][1], f.grid)
        ref = (1 - w) * ra + w * rb
        rows.append((float(t), lp_norm(Field(f.grid, f.values - ref, 0.0), 1)))
    return ErrorTable(rows)
