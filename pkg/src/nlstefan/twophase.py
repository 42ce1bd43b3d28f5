"""Nonlocal two-phase Stefan problem and its a-priori estimates.

    gamma_t = (a/eps^2) (K * gamma^+ - gamma^+) + (b/eps^2) (H * w - w),
    w = (gamma + ell0)^- = min(gamma + ell0, 0).

The far field sits at -alpha0 inside the mushy band (-ell0, 0), where neither
source term acts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import Initial
from .errors import DomainTooSmall, ValidationError
from .fronts import FrontTracker
from .grid import Convolver, Field, build_grid, lp_norm, positive_part, sample_kernel, shift_l1, shifted_excess
from .kernels import Kernel, diffusion_coefficient, rescale
from .onephase import OnePhaseProblem, RunResult, StefanState, _inside_margin, _tuple

__all__ = [
    "TwoPhaseConfig",
    "TwoPhaseProblem",
    "run_two",
    "rhs_two",
    "BoundsReport",
    "two_phase_bounds_check",
    "enthalpy_transform",
    "beta_inverse",
    "local_coefficients",
]


@dataclass
class TwoPhaseConfig:
    kernel_k: Kernel
    kernel_eta: Kernel
    initial: Initial
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    h: float
    a: float = 1.0
    b: float = 1.0
    ell0: float = 1.0
    alpha0: float = 0.5
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
            self.dt = 0.25 * self.eps**2 / (self.a + self.b)
        self.validate()

    @property
    def rate(self) -> float:
        return (self.a + self.b) / self.eps**2

    def validate(self):
        for name in ("a", "b", "ell0", "eps", "h", "dt"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, f"{name} > 0")
        if not 0 < self.alpha0 < self.ell0:
            raise ValidationError("alpha0", "0 < α₀ < ℓ₀")
        if self.integrator == "euler" and self.dt * self.rate > 1 + 1e-12:
            raise ValidationError("dt", "dt·(a+b)/eps² ≤ 1")
        if self.integrator not in ("euler", "heun"):
            raise ValidationError("integrator", "integrator in {euler, heun}")
        if self.conv_method not in ("auto", "direct", "fft"):
            raise ValidationError("conv_method", "conv_method in {auto, direct, fft}")
        n = len(self.lower)
        if self.kernel_k.dim != n or self.kernel_eta.dim != n or self.initial.dim != n:
            raise ValidationError("dim", "kernels, initial data and box share one dimension")


def local_coefficients(config: TwoPhaseConfig) -> tuple[float, float]:
    """Local diffusivities A = a * D(k), B = b * D(eta) with D(k) = (1/2n) int |x|^2 k."""
    return config.a * diffusion_coefficient(config.kernel_k), config.b * diffusion_coefficient(config.kernel_eta)


class TwoPhaseProblem(OnePhaseProblem):
    def __init__(self, config: TwoPhaseConfig):
        self.config = config
        self.grid = build_grid(config.lower, config.upper, config.h)
        self.kernel = sample_kernel(rescale(config.kernel_k, config.eps), self.grid, config.tail_tol)
        self.kernel_eta = sample_kernel(rescale(config.kernel_eta, config.eps), self.grid, config.tail_tol)
        self.conv = Convolver(self.grid, self.kernel, config.conv_method)
        self.conv_eta = Convolver(self.grid, self.kernel_eta, config.conv_method)
        self.rate_a = config.a / config.eps**2
        self.rate_b = config.b / config.eps**2
        self.rate = self.rate_a + self.rate_b
        self.exterior = -config.alpha0

    def init_state(self) -> StefanState:
        g0 = self.initial_field()
        if not self.margin_ok(g0.values):
            raise DomainTooSmall("initial phase sets plus one kernel radius do not fit in the box")
        return StefanState(g0, 0.0, 0)

    def solid(self, values: np.ndarray) -> np.ndarray:
        return values <= -self.config.ell0

    def margin_ok(self, values: np.ndarray) -> bool:
        return _inside_margin(self.liquid(values), self.kernel.radii) and _inside_margin(
            self.solid(values), self.kernel_eta.radii
        )

    def rhs_values(self, values: np.ndarray) -> np.ndarray:
        gp = np.where(values > 0, values, 0.0)
        w = np.minimum(values + self.config.ell0, 0.0)
        return self.rate_a * (self.conv(gp, 0.0) - gp) + self.rate_b * (self.conv_eta(w, 0.0) - w)

    def trackers(self):
        c = self.config
        return {
            "liquid": FrontTracker(self.grid, 0.0, +1, c.center, c.snapshot_every),
            "solid": FrontTracker(self.grid, -c.ell0, -1, c.center, c.snapshot_every),
        }


def run_two(config: TwoPhaseConfig, **kwargs) -> RunResult:
    """Integrate; the solid-phase trace is ``result.extra_traces['solid']``."""
    return TwoPhaseProblem(config).run(**kwargs)


def rhs_two(problem: TwoPhaseProblem, state: StefanState) -> Field:
    return Field(problem.grid, problem.rhs_values(state.gamma.values), 0.0)


@dataclass
class BoundsReport:
    liquid_bound: float
    solid_bound: float
    liquid_norms: list[float]
    solid_norms: list[float]
    max_ratio: float
    translation_ok: bool
    translation_excess: float

    @property
    def ok(self) -> bool:
        return self.max_ratio <= 1.0 and self.translation_ok


def two_phase_bounds_check(
    snapshots: list[tuple[float, Field]],
    config: TwoPhaseConfig,
    shifts: tuple[int, ...] = (1, 2, 5),
    slack: float = 1e-8,
) -> BoundsReport:
    """L^1 bounds on gamma^+ and (gamma + ell0)^- and the L^1 translation estimate.

    The liquid bound is M (1 + M/alpha0) |region|; the solid bound swaps the
    roles of the phases, alpha0 -> ell0 - alpha0.
    """
    g0 = snapshots[0][1]
    grid = g0.grid
    region = config.initial.region(grid)
    M = float(np.abs(g0.values[region]).max()) if region.any() else 0.0
    vol = float(region.sum() * grid.cell_volume)
    lb = M * (1 + M / config.alpha0) * vol
    sb = M * (1 + M / (config.ell0 - config.alpha0)) * vol
    ln = [lp_norm(positive_part(f), 1) for _, f in snapshots]
    sn = [lp_norm(shifted_excess(f, config.ell0), 1) for _, f in snapshots]
    ratios = [x / lb if lb else (0.0 if x == 0 else np.inf) for x in ln]
    ratios += [x / sb if sb else (0.0 if x == 0 else np.inf) for x in sn]
    excess = -np.inf
    for s in shifts:
        for axis in range(grid.dim):
            z = [0] * grid.dim
            z[axis] = s
            ref = shift_l1(g0, z)
            for _, f in snapshots:
                excess = max(excess, shift_l1(f, z) - ref)
    return BoundsReport(lb, sb, ln, sn, float(max(ratios)), bool(excess <= slack), float(excess))


def enthalpy_transform(gamma: Field | np.ndarray, A: float, B: float, ell0: float):
    """u = A gamma on gamma > 0, 0 on the mushy band, B (gamma + ell0) below -ell0."""
    if A <= 0 or B <= 0:
        raise ValueError("A and B must be positive")

    def u(v):
        v = np.asarray(v, dtype=float)
        return np.where(v > 0, A * v, np.where(v < -ell0, B * (v + ell0), 0.0))

    if isinstance(gamma, Field):
        return Field(gamma.grid, u(gamma.values), float(u(gamma.exterior)))
    return u(gamma)


def beta_inverse(u: float, A: float, B: float, ell0: float) -> tuple[float, float]:
    """The enthalpy interval beta(u): {u/A}, [-ell0, 0] or {u/B - ell0}."""
    if u > 0:
        return (u / A, u / A)
    if u < 0:
        return (u / B - ell0, u / B - ell0)
    return (-ell0, 0.0)
