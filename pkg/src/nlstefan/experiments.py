"""Scripted experiments: nucleation examples, continuity, boundedness, eps-sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domains import Box, InitialData, Shell
from .errors import ValidationError
from .fronts import components
from .kernels import AnnulusUniform, BallUniform, Kernel, Mollified, diffusion_coefficient, is_radially_decreasing
from .local import LocalConfig, convergence_metric, solve_enthalpy_local, solve_obstacle_vi, v_transform
from .onephase import OnePhaseConfig, OnePhaseProblem, RunResult
from .twophase import TwoPhaseConfig, TwoPhaseProblem, local_coefficients

__all__ = [
    "JumpReport",
    "run_example1",
    "run_example2",
    "ContinuityReport",
    "run_continuity",
    "BoundednessReport",
    "run_boundedness",
    "SweepReport",
    "run_convergence_sweep",
]


@dataclass
class JumpReport:
    jump_detected: bool
    jump_time: float
    nucleation_set: list[np.ndarray]
    predicted_time: float
    predicted_set: list[tuple[float, float]]
    discrepancy: dict[str, float]
    components_before: int = 0
    components_after: int = 0
    step_time: float = math.nan
    checks: dict[str, bool] = field(default_factory=dict)
    result: RunResult | None = None


def _exterior_touch(region):
    """Stop rule: any cell outside the initial region reached the liquid set."""

    def stop(state, born):
        return bool(np.any(state.gamma.values[~region] >= 0))

    return stop


def run_example1(
    sigma: float = 0.1,
    c0: float = 4.0,
    ell0: float = 1.0,
    d: float = 1.0,
    mollify_rho: float | None = None,
    h: float = 1 / 256,
    dt: float = 1e-3,
    half_width: float = 2.0,
    t_end: float = 5.0,
    allow_outside_claim: bool = False,
) -> JumpReport:
    """Interval [-1/4, 1/4] with the annulus kernel supported on 1 - sigma <= |x| <= 1 + sigma.

    The interior decays as c0 e^{-d t} untouched by itself, each point of the
    predicted set collects half of the outflow, and the first exterior touch
    happens at t1 = -ln(1 - 2 ell0 / c0) / d on
    [-5/4 + sigma, -3/4 - sigma] and its mirror image.
    """
    claim = 2 * ell0 < c0
    if not 0 < sigma < 0.25:
        raise ValidationError("sigma", "0 < σ < 1/4")
    if not claim and not allow_outside_claim:
        raise ValidationError("c0", "2ℓ₀ < c₀")
    kernel: Kernel = AnnulusUniform(1 - sigma, 1 + sigma)
    if mollify_rho:
        kernel = Mollified(kernel, mollify_rho)
    init = InitialData(Box((-0.25,), (0.25,)), c0)
    cfg = OnePhaseConfig(kernel, init, (-half_width,), (half_width,), h, ell0=ell0, d=d, dt=dt,
                         t_end=t_end, snapshot_every=1)
    prob = OnePhaseProblem(cfg)
    region = init.region(prob.grid)
    res = prob.run(stop=_exterior_touch(region))
    lo, hi = 0.75 + sigma, 1.25 - sigma
    predicted_set = [(-hi, -lo), (lo, hi)]
    predicted = -math.log(1 - 2 * ell0 / c0) / d if claim else math.inf
    return _jump_report(prob, res, region, predicted, predicted_set)


def _jump_report(prob, res, region, predicted, predicted_set) -> JumpReport:
    grid = prob.grid
    v = res.state.gamma.values
    fresh = (v >= 0) & ~region
    s = res.first_touch.values
    detected = bool(fresh.any())
    counts = res.trace.component_counts
    if detected:
        labels, n = components(fresh)
        pts = grid.points()
        cells = [pts[labels == k] for k in range(1, n + 1)]
        touch = float(np.nanmin(s[~region]))
    else:
        cells, touch = [], math.nan
    disc = {"time": abs(touch - predicted) if detected and math.isfinite(predicted) else math.nan}
    if detected and grid.dim == 1 and predicted_set:
        # endpoint distance between observed nucleation intervals and the predicted ones
        ends = sorted((float(c.min()), float(c.max())) for c in cells)
        pred = sorted(predicted_set)
        if len(ends) == len(pred):
            disc["set"] = max(max(abs(a - p), abs(b - q)) for (a, b), (p, q) in zip(ends, pred))
        else:
            disc["set"] = math.inf
    return JumpReport(
        jump_detected=detected,
        jump_time=touch,
        nucleation_set=cells,
        predicted_time=predicted,
        predicted_set=predicted_set,
        discrepancy=disc,
        components_before=counts[-2] if len(counts) > 1 else counts[-1],
        components_after=counts[-1],
        step_time=res.state.t if detected else math.nan,
        result=res,
    )


def run_example2(
    n: int = 2,
    c0: float = 2.0,
    ell0: float = 1.0,
    h: float = 1 / 64,
    dt: float = 1e-3,
    half_width: float = 4.0,
    t_end: float = 3.0,
    allow_outside_claim: bool = False,
) -> JumpReport:
    """Shell 1 <= |x| <= 2 with the uniform kernel on B_2: nucleation at the origin.

    The origin sees the whole shell through the kernel while every other
    exterior point sees strictly less, so it melts first, no later than
    -ln(1 - ell0 / ((1 - 2^-n) c0)).
    """
    if n < 2:
        raise ValidationError("n", "n ≥ 2")
    claim = (1 - 2.0**-n) * c0 > ell0
    if not claim and not allow_outside_claim:
        raise ValidationError("c0", "(1 − 2⁻ⁿ)c₀ > ℓ₀")
    zero = (0.0,) * n
    init = InitialData(Shell(zero, 1.0, 2.0), c0)
    cfg = OnePhaseConfig(BallUniform(2.0, n), init, (-half_width,) * n, (half_width,) * n, h,
                         ell0=ell0, dt=dt, t_end=t_end, snapshot_every=10**9)
    prob = OnePhaseProblem(cfg)
    grid = prob.grid
    region = init.region(grid)
    near = (grid.radius() <= 2 * h) & ~region
    far = ~region & ~near
    ordered = [True]

    def stop(state, born):
        v = state.gamma.values
        # before any touch, gamma + ell0 is the flux accumulated at exterior cells
        if v[near].max() <= v[far].max():
            ordered[0] = False
        return bool(np.any(v[~region] >= 0))

    res = prob.run(stop=stop)
    predicted = -math.log(1 - ell0 / ((1 - 2.0**-n) * c0)) if claim else math.inf
    rep = _jump_report(prob, res, region, predicted, [])
    v = res.state.gamma.values
    fresh = (v >= 0) & ~region
    rep.checks["origin_only"] = bool(fresh.any() and not np.any(fresh & far))
    rep.checks["origin_first"] = ordered[0]
    rep.checks["before_bound"] = bool(rep.jump_detected and rep.jump_time <= predicted)
    rep.discrepancy["max_radius"] = float(grid.radius()[fresh].max()) if fresh.any() else math.nan
    rep.predicted_set = [(0.0, 2 * h)]
    return rep


@dataclass
class ContinuityReport:
    kernel_radially_decreasing: bool
    shape_convex: bool
    component_counts: list[int]
    adjacency_ok: bool
    single_component: bool
    stopped: str
    t_final: float
    result: RunResult | None = None


def run_continuity(
    shape,
    kernel: Kernel,
    h: float,
    half_width: float,
    c0: float = 1.0,
    ell0: float = 1.0,
    dt: float | None = None,
    t_end: float = 60.0,
    tail_tol: float = 1e-10,
    quiescence_rel: float = 1e-6,
) -> ContinuityReport:
    """Run from a convex region with a radially decreasing kernel until quiescence.

    Counts components of the liquid set at every step and checks that every
    newly liquid cell is face-adjacent to the previous liquid set.
    """
    n = kernel.dim
    init = InitialData(shape, c0)
    cfg = OnePhaseConfig(kernel, init, (-half_width,) * n, (half_width,) * n, h, ell0=ell0, dt=dt,
                         t_end=t_end, snapshot_every=10, tail_tol=tail_tol)
    prob = OnePhaseProblem(cfg)
    adjacency = [True]

    def stop(state, born):
        # a newly born component is a set of new cells with no face contact to the old set
        if born:
            adjacency[0] = False
        return False

    res = prob.run(stop=stop, quiescence=quiescence_rel * c0)
    counts = res.trace.component_counts
    return ContinuityReport(
        kernel_radially_decreasing=is_radially_decreasing(kernel),
        shape_convex=bool(getattr(shape, "convex", False)),
        component_counts=counts,
        adjacency_ok=adjacency[0],
        single_component=all(c == 1 for c in counts),
        stopped=res.stopped,
        t_final=res.state.t,
        result=res,
    )


@dataclass
class BoundednessReport:
    max_radius: float
    total_measure: float
    measure_bound: float
    radius_stable: bool
    positive_l1_nonincreasing: bool
    stopped: str
    t_final: float
    result: RunResult | None = None

    @property
    def measure_ok(self) -> bool:
        return self.total_measure <= self.measure_bound + 1e-12


def run_boundedness(config: OnePhaseConfig, quiescence_rel: float = 1e-6, tail_fraction: float = 0.2
                    ) -> BoundednessReport:
    """Run to quiescence and compare the final liquid measure with (1 + max gamma_0 / ell0) M.

    M is the length of the initial region's projection on the first axis; in
    1-D it is the measure of the region itself.
    """
    prob = OnePhaseProblem(config)
    g0 = prob.initial_field()
    region = config.initial.region(prob.grid)
    c0 = float(g0.values[region].max())
    res = prob.run(quiescence=quiescence_rel * c0)
    lo, hi = config.initial.projection()
    M = hi - lo
    bound = (1 + c0 / config.ell0) * M
    # the liquid set only grows, so the union over time is the final set
    union = np.zeros(prob.grid.shape, dtype=bool)
    for _, m in res.trace.masks:
        union |= m
    union |= res.state.gamma.values >= 0
    if prob.grid.dim == 1:
        measure = float(union.sum() * prob.grid.h)
    else:
        # measure of the projection on the first axis
        measure = float(union.any(axis=tuple(range(1, prob.grid.dim))).sum() * prob.grid.h)
    radii = res.trace.enclosing_radius
    k = int(len(radii) * (1 - tail_fraction))
    tail = radii[k:]
    l1 = np.asarray(res.positive_l1)
    return BoundednessReport(
        max_radius=float(max(radii)),
        total_measure=measure,
        measure_bound=bound,
        radius_stable=bool(len(tail) == 0 or max(tail) == min(tail)),
        positive_l1_nonincreasing=bool(np.all(np.diff(l1) <= 1e-12 * max(l1[0], 1.0))),
        stopped=res.stopped,
        t_final=res.state.t,
        result=res,
    )


@dataclass
class SweepReport:
    kind: str
    eps: list[float]
    errors: list[float]
    rows: list[tuple[float, float, float]]

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def run_convergence_sweep(
    kind: str = "onephase",
    eps_list: Sequence[float] = (0.4, 0.2, 0.1),
    kernel: Kernel | None = None,
    h: float = 0.0125,
    half_width: float = 3.0,
    t_end: float = 0.5,
    c0: float = 2.0,
    ell0: float = 1.0,
    alpha0: float | None = None,
    n_times: int = 10,
    dt_max: float = 0.005,
    reference_dt: float = 1e-4,
) -> SweepReport:
    """Distance between rescaled nonlocal runs and the local reference, per eps.

    'onephase' compares v_eps = int gamma_eps^+ with the obstacle-problem
    solution for f = gamma_0 on [-1/2, 1/2]; 'twophase' compares gamma_eps
    with the enthalpy scheme, starting from c0 on the left half of the interval
    and -ell0 - c0 on the right half.  Errors are the max over ``n_times``
    equispaced times of the L^1 distance over the box.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("eps_list", "eps_list strictly decreasing")
    if h > min(eps_list) / 4 + 1e-15:
        raise ValidationError("h", "h ≤ eps_min/4")
    kernel = BallUniform(1.0) if kernel is None else kernel
    lower, upper = (-half_width,), (half_width,)
    times = np.round(np.linspace(t_end / n_times, t_end, n_times), 12)
    rows, errors = [], []
    if kind == "onephase":
        init = InitialData(Box((-0.5,), (0.5,)), c0)
        A = diffusion_coefficient(kernel)
        ref = solve_obstacle_vi(LocalConfig(A, init, lower, upper, h, ell0=ell0, dt=reference_dt,
                                            t_end=t_end, snapshot_every=max(int(round(t_end / n_times / reference_dt)), 1)))
        for eps in eps_list:
            cfg = OnePhaseConfig(kernel, init, lower, upper, h, ell0=ell0, eps=eps, t_end=t_end,
                                 snapshot_every=1, dt=min(0.25 * eps**2, dt_max))
            res = OnePhaseProblem(cfg).run()
            table = convergence_metric(v_transform(res.snapshots), ref.snapshots, times=times)
            rows += [(eps, t, e) for t, e in table.rows]
            errors.append(table.max_error)
    elif kind == "twophase":
        alpha0 = 0.5 * ell0 if alpha0 is None else alpha0
        init = InitialData(Box((-0.5,), (0.5,)), c0, c1=-ell0 - c0)
        probe = TwoPhaseConfig(kernel, kernel, init, lower, upper, h, ell0=ell0, alpha0=alpha0)
        A, B = local_coefficients(probe)
        ref = solve_enthalpy_local(LocalConfig(A, init, lower, upper, h, B=B, ell0=ell0, exterior=-alpha0,
                                               t_end=t_end, snapshot_every=1))
        for eps in eps_list:
            cfg = TwoPhaseConfig(kernel, kernel, init, lower, upper, h, ell0=ell0, alpha0=alpha0, eps=eps,
                                 t_end=t_end, snapshot_every=1, dt=min(0.125 * eps**2, dt_max))
            res = TwoPhaseProblem(cfg).run()
            table = convergence_metric(res.snapshots, ref.snapshots, times=times)
            rows += [(eps, t, e) for t, e in table.rows]
            errors.append(table.max_error)
    else:
        raise ValidationError("kind", "kind in {onephase, twophase}")
    return SweepReport(kind, eps_list, errors, rows)
