"""Explicit time stepping for the nonlocal one-phase Stefan problem.

The enthalpy gamma evolves by

    gamma_t = (d / eps^2) * (K_eps * gamma^+ - gamma^+),

where gamma^+ = gamma * 1{gamma > 0}; the liquid set is {gamma >= 0} and the
far field is frozen at -ell0.  Forward Euler with dt * d / eps^2 <= 1 is a
monotone map, so the comparison and maximum principles hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domains import Initial
from .errors import DomainTooSmall, ValidationError
from .fronts import FrontTrace, FrontTracker, Jump, interior
from .grid import Convolver, Field, build_grid, sample_kernel
from .kernels import Kernel, rescale

__all__ = [
    "OnePhaseConfig",
    "StefanState",
    "RunResult",
    "OnePhaseProblem",
    "run",
    "first_touch_times",
    "strong_positivity_check",
    "comparison_check",
    "picard_solution",
]


def _tuple(x):
    return tuple(float(a) for a in np.atleast_1d(x))


@dataclass
class OnePhaseConfig:
    kernel: Kernel
    initial: Initial
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    h: float
    ell0: float = 1.0
    d: float = 1.0
    eps: float = 1.0
    dt: float | None = None
    t_end: float = 1.0
    snapshot_every: int = 10
    tail_tol: float = 1e-12
    conv_method: str = "auto"
    integrator: str = "euler"
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        self.lower = _tuple(self.lower)
        self.upper = _tuple(self.upper)
        if self.dt is None:
            self.dt = 0.25 * self.eps**2 / self.d
        self.validate()

    @property
    def rate(self) -> float:
        return self.d / self.eps**2

    def validate(self):
        for name in ("ell0", "d", "eps", "h", "dt"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, f"{name} > 0")
        if self.t_end < 0:
            raise ValidationError("t_end", "t_end >= 0")
        if self.integrator == "euler" and self.dt * self.rate > 1 + 1e-12:
            raise ValidationError("dt", "dt·d/eps² ≤ 1")
        if self.integrator not in ("euler", "heun"):
            raise ValidationError("integrator", "integrator in {euler, heun}")
        if self.conv_method not in ("auto", "direct", "fft"):
            raise ValidationError("conv_method", "conv_method in {auto, direct, fft}")
        if self.kernel.dim != len(self.lower) or self.initial.dim != len(self.lower):
            raise ValidationError("dim", "kernel, initial data and box share one dimension")
        if self.snapshot_every < 1:
            raise ValidationError("snapshot_every", "snapshot_every >= 1")


@dataclass
class StefanState:
    gamma: Field
    t: float = 0.0
    step: int = 0

    def copy(self) -> "StefanState":
        return StefanState(self.gamma.copy(), self.t, self.step)


@dataclass
class RunResult:
    snapshots: list[tuple[float, Field]]
    trace: FrontTrace
    state: StefanState
    stopped: str = "t_end"
    gamma_min: float = np.inf
    gamma_max: float = -np.inf
    strongly_positive: bool = True
    extra_traces: dict = field(default_factory=dict)
    # per-step diagnostics, index 0 is the initial state
    mass: list[float] = field(default_factory=list)
    positive_l1: list[float] = field(default_factory=list)

    @property
    def first_touch(self) -> Field:
        return self.trace.first_touch

    @property
    def jumps(self) -> list[Jump]:
        return self.trace.jumps


class OnePhaseProblem:
    """Discretized problem: grid, sampled rescaled kernel and convolution engine."""

    def __init__(self, config: OnePhaseConfig):
        self.config = config
        self.grid = build_grid(config.lower, config.upper, config.h)
        self.kernel = sample_kernel(rescale(config.kernel, config.eps), self.grid, config.tail_tol)
        self.conv = Convolver(self.grid, self.kernel, config.conv_method)
        self.rate = config.rate
        self.exterior = -config.ell0

    # -- state ------------------------------------------------------------
    def initial_field(self) -> Field:
        return self.config.initial.field(self.grid, self.exterior)

    def init_state(self) -> StefanState:
        region = self.config.initial.region(self.grid)
        g0 = self.initial_field()
        vals = g0.values[region]
        if vals.size == 0 or np.any(vals < 0):
            raise ValidationError("initial", "γ₀ ≥ 0 on Ω̄₀")
        if not np.any(vals > 0):
            raise ValidationError("initial", "γ₀ ≢ 0 on Ω̄₀")
        if not self.margin_ok(g0.values):
            raise DomainTooSmall("initial region plus one kernel radius does not fit in the box")
        return StefanState(g0, 0.0, 0)

    def liquid(self, values: np.ndarray) -> np.ndarray:
        return values >= 0

    def margin_ok(self, values: np.ndarray) -> bool:
        return _inside_margin(self.liquid(values), self.kernel.radii)

    # -- dynamics ---------------------------------------------------------
    def rhs_values(self, values: np.ndarray) -> np.ndarray:
        gp = np.where(values > 0, values, 0.0)
        return self.rate * (self.conv(gp, 0.0) - gp)

    def rhs(self, state: StefanState) -> Field:
        return Field(self.grid, self.rhs_values(state.gamma.values), 0.0)

    def advance(self, values: np.ndarray, dt: float) -> np.ndarray:
        f0 = self.rhs_values(values)
        if self.config.integrator == "heun":
            pred = values + dt * f0
            return values + 0.5 * dt * (f0 + self.rhs_values(pred))
        return values + dt * f0

    def step(self, state: StefanState, dt: float | None = None) -> StefanState:
        dt = self.config.dt if dt is None else dt
        if self.config.integrator == "euler" and dt * self.rate > 1 + 1e-12:
            raise ValidationError("dt", "dt·d/eps² ≤ 1")
        if not self.margin_ok(state.gamma.values):
            raise DomainTooSmall(f"phase set within one kernel radius of the box at t={state.t:.6g}")
        new = self.advance(state.gamma.values, dt)
        return StefanState(Field(self.grid, new, state.gamma.exterior), state.t + dt, state.step + 1)

    # -- driver -------------------------------------------------------------
    def trackers(self) -> dict[str, FrontTracker]:
        c = self.config
        return {"liquid": FrontTracker(self.grid, 0.0, +1, c.center, c.snapshot_every)}

    def run(
        self,
        state: StefanState | None = None,
        t_end: float | None = None,
        stop: Callable[[StefanState, list], bool] | None = None,
        on_margin: str = "raise",
        quiescence: float | None = None,
        snapshot_every: int | None = None,
    ) -> RunResult:
        """Integrate to ``t_end`` recording snapshots, front traces and diagnostics.

        ``stop(state, born)`` is called after every step with the list of newly
        nucleated liquid components and ends the run when it returns True.
        ``on_margin`` is 'raise' or 'stop'.  ``quiescence`` ends the run once
        max gamma^+ drops below it.
        """
        c = self.config
        state = self.init_state() if state is None else state
        t_end = c.t_end if t_end is None else t_end
        every = snapshot_every or c.snapshot_every
        trackers = self.trackers()
        main = next(iter(trackers.values()))
        for tr in trackers.values():
            tr.start(state.t, state.gamma.values)
        result = RunResult([(state.t, state.gamma.copy())], main.trace, state)
        result.gamma_min = float(min(state.gamma.values.min(), state.gamma.exterior))
        result.gamma_max = float(max(state.gamma.values.max(), state.gamma.exterior))
        vol = self.grid.cell_volume

        def diagnostics(v):
            result.mass.append(float(v.sum() * vol))
            result.positive_l1.append(float(np.maximum(v, 0.0).sum() * vol))

        diagnostics(state.gamma.values)
        old_interior = np.zeros(self.grid.shape, dtype=bool)
        n_steps = int(round((t_end - state.t) / c.dt))
        last_snap = 0
        for _ in range(n_steps):
            if not self.margin_ok(state.gamma.values):
                if on_margin == "stop":
                    result.stopped = "margin"
                    break
                raise DomainTooSmall(f"phase set within one kernel radius of the box at t={state.t:.6g}")
            prev = state
            old_interior |= interior(main.mask)
            state = self.step(state)
            v = state.gamma.values
            born = main.update(prev.t, state.t, prev.gamma.values, v)
            for name, tr in trackers.items():
                if tr is not main:
                    tr.update(prev.t, state.t, prev.gamma.values, v)
            if result.strongly_positive and not np.all(v[old_interior] > 0):
                result.strongly_positive = False
            result.gamma_min = min(result.gamma_min, float(v.min()))
            result.gamma_max = max(result.gamma_max, float(v.max()))
            diagnostics(v)
            if state.step % every == 0:
                result.snapshots.append((state.t, state.gamma.copy()))
                last_snap = state.step
            if stop is not None and stop(state, born):
                result.stopped = "stop"
                break
            if quiescence is not None and v.max() < quiescence:
                result.stopped = "quiescent"
                break
        if last_snap != state.step:
            result.snapshots.append((state.t, state.gamma.copy()))
        result.state = state
        result.trace = main.finish()
        result.extra_traces = {k: tr.finish() for k, tr in trackers.items() if tr is not main}
        return result


def _inside_margin(mask: np.ndarray, radii) -> bool:
    """True when every mask cell lies at least ``radii`` cells from the box edge."""
    for k, r in enumerate(radii):
        if r == 0:
            continue
        n = mask.shape[k]
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[k] = slice(0, min(r, n))
        hi[k] = slice(max(n - r, 0), n)
        if mask[tuple(lo)].any() or mask[tuple(hi)].any():
            return False
    return True


def run(config: OnePhaseConfig, **kwargs) -> RunResult:
    return OnePhaseProblem(config).run(**kwargs)


def first_touch_times(snapshots: list[tuple[float, Field]], level: float = 0.0) -> Field:
    """s(x) from stored snapshots: first crossing of ``level``, linear in time; NaN if never."""
    t0, f0 = snapshots[0]
    tracker = FrontTracker(f0.grid, level, +1)
    tracker.start(t0, f0.values)
    for (ta, fa), (tb, fb) in zip(snapshots[:-1], snapshots[1:]):
        tracker.update(ta, tb, fa.values, fb.values)
    return tracker.finish().first_touch


def strong_positivity_check(snapshots: list[tuple[float, Field]]) -> bool:
    """True iff gamma(t) > 0 on the interior of every earlier liquid set."""
    seen = np.zeros(snapshots[0][1].grid.shape, dtype=bool)
    for i, (_, f) in enumerate(snapshots):
        if i and not np.all(f.values[seen] > 0):
            return False
        seen |= interior(f.values >= 0)
    return True


def comparison_check(config: OnePhaseConfig, config_star: OnePhaseConfig, n_steps: int | None = None,
                     slack: float = 1e-12) -> bool:
    """Run both problems in lockstep; True iff gamma* >= gamma - slack at every step."""
    p, q = OnePhaseProblem(config), OnePhaseProblem(config_star)
    a, b = p.init_state().gamma.values, q.init_state().gamma.values
    if np.any(b < a):
        raise ValueError("comparison needs gamma*_0 >= gamma_0")
    n = int(round(config.t_end / config.dt)) if n_steps is None else n_steps
    for _ in range(n):
        a = p.advance(a, config.dt)
        b = q.advance(b, config.dt)
        if np.any(b < a - slack):
            return False
    return True


def picard_solution(
    problem: OnePhaseProblem,
    values: np.ndarray,
    horizon: float,
    nodes: int = 161,
    tol: float = 1e-13,
    max_iter: int = 500,
) -> np.ndarray:
    """Solve gamma(t) = gamma_0 + int_0^t F(gamma) by Picard iteration on a fine time grid.

    Uses the trapezoid rule on ``nodes`` equispaced times; returns gamma(horizon).
    """
    tgrid = np.linspace(0.0, horizon, nodes)
    dt = tgrid[1] - tgrid[0]
    path = np.repeat(values[None], nodes, axis=0)
    for _ in range(max_iter):
        F = np.stack([problem.rhs_values(g) for g in path])
        inc = 0.5 * dt * (F[1:] + F[:-1])
        new = np.concatenate([values[None], values[None] + np.cumsum(inc, axis=0)])
        change = float(np.max(np.abs(new - path)))
        path = new
        if change < tol:
            break
    return path[-1]
