"""Convolution kernels: analytic families, moments, Fourier symbols.

Every kernel is a probability density on R^n.  Families are frozen
dataclasses so they can be hashed, compared and serialized; the module-level
functions (``moment``, ``fourier_eval``, ``check_prop12`` ...) are the public
entry points and simply dispatch to the family methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import InconsistentKernel, NonIntegrableMoment, QuadratureNonConvergence

__all__ = [
    "Kernel",
    "AnnulusUniform",
    "BallUniform",
    "BoxUniform",
    "Gaussian",
    "Mixture",
    "Shifted",
    "Mollified",
    "BallMarginal",
    "Tabulated1D",
    "PeriodicKernel",
    "KernelReport",
    "unit_ball_volume",
    "moment",
    "abs_moment",
    "fourier_eval",
    "fourier_quad",
    "diffusion_coefficient",
    "check_prop12",
    "rescale",
    "marginal_1d",
    "periodize",
    "is_radially_decreasing",
]


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _sphere_moment(alpha: Sequence[int]) -> float:
    """E[prod x_i^alpha_i] for x uniform on the unit sphere S^{n-1}."""
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    k = sum(alpha)
    out = math.gamma(n / 2) / math.gamma((n + k) / 2)
    for a in alpha:
        out *= math.gamma((a + 1) / 2) / math.gamma(0.5)
    return out


def _ball_symbol(n: int, z):
    """Characteristic function of the uniform law on the unit ball, at radius z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1e-3
    zs = z[small]
    out[small] = 1 - zs**2 / (2 * (n + 2)) + zs**4 / (8 * (n + 2) * (n + 4))
    zl = z[~small]
    if n == 1:
        out[~small] = np.sin(zl) / zl
    else:
        nu = n / 2
        out[~small] = math.gamma(nu + 1) * (2 / zl) ** nu * special.jv(nu, zl)
    return out


def _uniform_moment_1d(a: float, k: int) -> float:
    """E[x^k] for x uniform on [-a, a]."""
    return 0.0 if k % 2 else a**k / (k + 1)


def _gauss_moment_1d(s: float, k: int) -> float:
    if k % 2:
        return 0.0
    return s**k * float(special.factorial2(k - 1)) if k else 1.0


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def _uniform_G(x, p, q):
    """Antiderivative of the CDF of the uniform law on [p, q]."""
    x = np.asarray(x, dtype=float)
    return np.where(
        x <= p, 0.0, np.where(x >= q, x - 0.5 * (p + q), (x - p) ** 2 / (2 * (q - p)))
    )


class Kernel:
    """Base class; subclasses are frozen dataclasses with a ``dim`` property."""

    dim: int

    # -- evaluation -------------------------------------------------------
    def density(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.density(x)

    def fourier(self, xi) -> complex:
        raise NotImplementedError

    def moment(self, order: Sequence[int]) -> float:
        raise NotImplementedError

    def rescaled(self, eps: float) -> "Kernel":
        raise NotImplementedError

    def extent(self, tol: float = 1e-12) -> np.ndarray:
        """Per-axis half-width of a box holding all but ``tol`` of the mass."""
        raise NotImplementedError

    # 1-D helpers (only some families implement them)
    def cdf(self, x):
        raise NotImplementedError

    def icdf(self, x):
        """Antiderivative of the CDF, vanishing at -infinity."""
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        return []

    def factors(self) -> list["Kernel"] | None:
        """1-D factors if the kernel is a tensor product, else None."""
        return None

    @property
    def compact(self) -> bool:
        return True


@dataclass(frozen=True)
class AnnulusUniform(Kernel):
    """Uniform density on inner <= |x| <= outer."""

    inner: float
    outer: float
    n: int = 1

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("AnnulusUniform needs 0 <= inner < outer")

    @property
    def dim(self):
        return self.n

    @property
    def level(self) -> float:
        n = self.n
        return 1.0 / (unit_ball_volume(n) * (self.outer**n - self.inner**n))

    def density(self, x):
        x = _as_points(x, self.n)
        r = np.linalg.norm(x, axis=-1)
        return np.where((r >= self.inner) & (r <= self.outer), self.level, 0.0)

    def _radial_moment(self, k):
        n, a, b = self.n, self.inner, self.outer
        return n / (n + k) * (b ** (n + k) - a ** (n + k)) / (b**n - a**n)

    def moment(self, order):
        return self._radial_moment(sum(order)) * _sphere_moment(order)

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        rho = float(np.linalg.norm(xi))
        n, a, b = self.n, self.inner, self.outer
        big = b**n * _ball_symbol(n, b * rho)
        small = a**n * _ball_symbol(n, a * rho) if a > 0 else 0.0
        return complex(float((big - small) / (b**n - a**n)))

    def rescaled(self, eps):
        return AnnulusUniform(self.inner * eps, self.outer * eps, self.n)

    def extent(self, tol=1e-12):
        return np.full(self.n, self.outer)

    def _pieces(self):
        # 1-D: two uniform laws of weight 1/2
        a, b = self.inner, self.outer
        return [(0.5, -b, -a), (0.5, a, b)]

    def cdf(self, x):
        self._need_1d()
        x = np.asarray(x, dtype=float)
        return sum(w * np.clip((x - p) / (q - p), 0, 1) for w, p, q in self._pieces())

    def icdf(self, x):
        self._need_1d()
        return sum(w * _uniform_G(x, p, q) for w, p, q in self._pieces())

    def breakpoints(self):
        return [-self.outer, -self.inner, self.inner, self.outer]

    def _need_1d(self):
        if self.n != 1:
            raise NotImplementedError("CDF only for 1-D kernels")


@dataclass(frozen=True)
class BallUniform(Kernel):
    radius: float
    n: int = 1

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self):
        return self.n

    @property
    def level(self):
        return 1.0 / (unit_ball_volume(self.n) * self.radius**self.n)

    def density(self, x):
        x = _as_points(x, self.n)
        r = np.linalg.norm(x, axis=-1)
        return np.where(r <= self.radius, self.level, 0.0)

    def moment(self, order):
        k = sum(order)
        return self.radius**k * self.n / (self.n + k) * _sphere_moment(order)

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return complex(float(_ball_symbol(self.n, self.radius * np.linalg.norm(xi))))

    def rescaled(self, eps):
        return BallUniform(self.radius * eps, self.n)

    def extent(self, tol=1e-12):
        return np.full(self.n, self.radius)

    def cdf(self, x):
        return BoxUniform((self.radius,)).cdf(x) if self.n == 1 else Kernel.cdf(self, x)

    def icdf(self, x):
        return BoxUniform((self.radius,)).icdf(x) if self.n == 1 else Kernel.icdf(self, x)

    def breakpoints(self):
        return [-self.radius, self.radius]

    def factors(self):
        return [self] if self.n == 1 else None


@dataclass(frozen=True)
class BoxUniform(Kernel):
    halfwidths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "halfwidths", tuple(float(a) for a in np.atleast_1d(self.halfwidths)))
        if not self.halfwidths or min(self.halfwidths) <= 0:
            raise ValueError("halfwidths must be positive")

    @property
    def dim(self):
        return len(self.halfwidths)

    def density(self, x):
        x = _as_points(x, self.dim)
        a = np.asarray(self.halfwidths)
        inside = np.all(np.abs(x) <= a, axis=-1)
        return np.where(inside, 1.0 / np.prod(2 * a), 0.0)

    def moment(self, order):
        return math.prod(_uniform_moment_1d(a, k) for a, k in zip(self.halfwidths, order))

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = 1.0
        for a, x in zip(self.halfwidths, xi):
            out *= float(_ball_symbol(1, abs(a * x)))
        return complex(out)

    def rescaled(self, eps):
        return BoxUniform(tuple(a * eps for a in self.halfwidths))

    def extent(self, tol=1e-12):
        return np.asarray(self.halfwidths)

    def cdf(self, x):
        a = self.halfwidths[0]
        return np.clip((np.asarray(x, dtype=float) + a) / (2 * a), 0, 1)

    def icdf(self, x):
        a = self.halfwidths[0]
        return _uniform_G(x, -a, a)

    def breakpoints(self):
        a = self.halfwidths[0]
        return [-a, a]

    def factors(self):
        return [BoxUniform((a,)) for a in self.halfwidths]


@dataclass(frozen=True)
class Gaussian(Kernel):
    """Centered Gaussian with diagonal covariance diag(sigma**2)."""

    sigma: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(float(s) for s in np.atleast_1d(self.sigma)))
        if not self.sigma or min(self.sigma) <= 0:
            raise ValueError("sigma must be positive")

    @property
    def dim(self):
        return len(self.sigma)

    @property
    def compact(self):
        return False

    def density(self, x):
        x = _as_points(x, self.dim)
        s = np.asarray(self.sigma)
        z = x / s
        return np.exp(-0.5 * np.sum(z**2, axis=-1)) / np.prod(np.sqrt(2 * np.pi) * s)

    def moment(self, order):
        return math.prod(_gauss_moment_1d(s, k) for s, k in zip(self.sigma, order))

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        s = np.asarray(self.sigma)
        return complex(math.exp(-0.5 * float(np.sum((s * xi) ** 2))))

    def rescaled(self, eps):
        return Gaussian(tuple(s * eps for s in self.sigma))

    def extent(self, tol=1e-12):
        # per-axis two-sided tail tol/n, so the box misses at most tol
        q = tol / self.dim
        r = math.sqrt(2.0) * special.erfcinv(q)
        return np.asarray(self.sigma) * r

    def cdf(self, x):
        return special.ndtr(np.asarray(x, dtype=float) / self.sigma[0])

    def icdf(self, x):
        s = self.sigma[0]
        x = np.asarray(x, dtype=float)
        return x * special.ndtr(x / s) + s * np.exp(-0.5 * (x / s) ** 2) / math.sqrt(2 * math.pi)

    def factors(self):
        return [Gaussian((s,)) for s in self.sigma]

    @property
    def isotropic(self):
        return len(set(self.sigma)) == 1


@dataclass(frozen=True)
class Mixture(Kernel):
    """Convex combination of kernels of equal dimension."""

    weights: tuple[float, ...]
    components: tuple[Kernel, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) != len(self.components) or not self.components:
            raise ValueError("one weight per component required")
        if min(self.weights) <= 0 or abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        if len({c.dim for c in self.components}) != 1:
            raise ValueError("mixture components must share a dimension")

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def compact(self):
        return all(c.compact for c in self.components)

    def _sum(self, f):
        return sum(w * f(c) for w, c in zip(self.weights, self.components))

    def density(self, x):
        return self._sum(lambda c: c.density(x))

    def moment(self, order):
        return self._sum(lambda c: c.moment(order))

    def fourier(self, xi):
        return complex(self._sum(lambda c: c.fourier(xi)))

    def rescaled(self, eps):
        return Mixture(self.weights, tuple(c.rescaled(eps) for c in self.components))

    def extent(self, tol=1e-12):
        return np.max([c.extent(tol) for c in self.components], axis=0)

    def cdf(self, x):
        return self._sum(lambda c: c.cdf(x))

    def icdf(self, x):
        return self._sum(lambda c: c.icdf(x))

    def breakpoints(self):
        return sorted({b for c in self.components for b in c.breakpoints()})


@dataclass(frozen=True)
class Shifted(Kernel):
    """Kernel translated by ``offset``; used to build moment-violating mixtures."""

    base: Kernel
    offset: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(c) for c in np.atleast_1d(self.offset)))
        if len(self.offset) != self.base.dim:
            raise ValueError("offset dimension mismatch")

    @property
    def dim(self):
        return self.base.dim

    @property
    def compact(self):
        return self.base.compact

    def density(self, x):
        x = _as_points(x, self.dim)
        return self.base.density(x - np.asarray(self.offset))

    def moment(self, order):
        c = self.offset
        total = 0.0
        for beta in product(*(range(a + 1) for a in order)):
            coef = math.prod(math.comb(a, b) * c[i] ** (a - b) for i, (a, b) in enumerate(zip(order, beta)))
            if coef:
                total += coef * self.base.moment(beta)
        return total

    def fourier(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        phase = complex(np.exp(-1j * float(np.dot(self.offset, xi))))
        return phase * self.base.fourier(xi)

    def rescaled(self, eps):
        return Shifted(self.base.rescaled(eps), tuple(c * eps for c in self.offset))

    def extent(self, tol=1e-12):
        return self.base.extent(tol) + np.abs(self.offset)

    def cdf(self, x):
        return self.base.cdf(np.asarray(x, dtype=float) - self.offset[0])

    def icdf(self, x):
        return self.base.icdf(np.asarray(x, dtype=float) - self.offset[0])

    def breakpoints(self):
        return [b + self.offset[0] for b in self.base.breakpoints()]

    def factors(self):
        f = self.base.factors()
        if f is None:
            return None
        return [Shifted(k, (c,)) for k, c in zip(f, self.offset)]


@dataclass(frozen=True)
class Mollified(Kernel):
    """1-D kernel convolved with the uniform law on [-rho, rho].

    Smooths the discontinuous annulus kernel into a continuous one while
    keeping it within O(rho) of the original in L^1.
    """

    base: Kernel
    rho: float

    def __post_init__(self):
        if self.base.dim != 1:
            raise ValueError("mollification is implemented for 1-D kernels only")
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    @property
    def dim(self):
        return 1

    @property
    def compact(self):
        return self.base.compact

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        r = self.rho
        return (self.base.cdf(x + r) - self.base.cdf(x - r)) / (2 * r)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        r = self.rho
        return (self.base.icdf(x + r) - self.base.icdf(x - r)) / (2 * r)

    def moment(self, order):
        (k,) = order
        return sum(
            math.comb(k, j) * self.base.moment((j,)) * _uniform_moment_1d(self.rho, k - j)
            for j in range(k + 1)
        )

    def fourier(self, xi):
        xi = float(np.atleast_1d(xi)[0])
        return self.base.fourier(xi) * float(_ball_symbol(1, abs(self.rho * xi)))

    def rescaled(self, eps):
        return Mollified(self.base.rescaled(eps), self.rho * eps)

    def extent(self, tol=1e-12):
        return self.base.extent(tol) + self.rho

    def breakpoints(self):
        return sorted({b + s for b in self.base.breakpoints() for s in (-self.rho, self.rho)})


@dataclass(frozen=True)
class BallMarginal(Kernel):
    """First-coordinate marginal of the uniform law on a ball in R^m."""

    radius: float
    parent_dim: int

    @property
    def dim(self):
        return 1

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        m, r = self.parent_dim, self.radius
        c = unit_ball_volume(m - 1) / (unit_ball_volume(m) * r**m)
        return c * np.clip(r * r - x * x, 0, None) ** ((m - 1) / 2)

    def moment(self, order):
        (k,) = order
        alpha = (k,) + (0,) * (self.parent_dim - 1)
        return BallUniform(self.radius, self.parent_dim).moment(alpha)

    def fourier(self, xi):
        xi = float(np.atleast_1d(xi)[0])
        return complex(float(_ball_symbol(self.parent_dim, abs(self.radius * xi))))

    def rescaled(self, eps):
        return BallMarginal(self.radius * eps, self.parent_dim)

    def extent(self, tol=1e-12):
        return np.array([self.radius])

    def breakpoints(self):
        return [-self.radius, self.radius]


@dataclass(frozen=True, eq=False)
class Tabulated1D(Kernel):
    """Piecewise-constant 1-D density on cells centred at x0 + i*dx."""

    x0: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        v = np.clip(np.asarray(self.values, dtype=float), 0, None)
        v = v / (v.sum() * self.dx)
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return 1

    @property
    def centers(self):
        return self.x0 + self.dx * np.arange(len(self.values))

    @property
    def edges(self):
        return self.x0 - 0.5 * self.dx + self.dx * np.arange(len(self.values) + 1)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim and x.shape[-1] == 1:
            x = x[..., 0]
        i = np.floor((x - self.edges[0]) / self.dx).astype(int)
        ok = (i >= 0) & (i < len(self.values))
        return np.where(ok, self.values[np.clip(i, 0, len(self.values) - 1)], 0.0)

    def cdf(self, x):
        cum = np.concatenate([[0.0], np.cumsum(self.values) * self.dx])
        return np.interp(x, self.edges, cum)

    def moment(self, order):
        (k,) = order
        e = self.edges
        cell = (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / (k + 1)
        return float(np.sum(self.values * cell))

    def fourier(self, xi):
        xi = float(np.atleast_1d(xi)[0])
        if xi == 0:
            return 1 + 0j
        s = float(_ball_symbol(1, abs(0.5 * self.dx * xi)))
        return complex(np.sum(self.values * self.dx * np.exp(-1j * self.centers * xi)) * s)

    def rescaled(self, eps):
        return Tabulated1D(self.x0 * eps, self.dx * eps, self.values / eps)

    def extent(self, tol=1e-12):
        e = self.edges
        return np.array([max(abs(e[0]), abs(e[-1]))])

    def breakpoints(self):
        return list(self.edges)


# ---------------------------------------------------------------------------
# public operations


def moment(kernel: Kernel, order: Sequence[int]) -> float:
    """Return the mixed moment int x^order k(x) dx."""
    order = tuple(int(a) for a in np.atleast_1d(order))
    if len(order) != kernel.dim or min(order) < 0:
        raise ValueError(f"order {order} does not match dimension {kernel.dim}")
    val = kernel.moment(order)
    if not math.isfinite(val):
        raise NonIntegrableMoment(f"moment {order} of {kernel!r} is infinite")
    return float(val)


def _axis_order(n, j, k):
    o = [0] * n
    o[j] = k
    return tuple(o)


def abs_moment(kernel: Kernel, p: float) -> float:
    """Return int |x|^p k(x) dx (closed form where known, quadrature otherwise)."""
    n = kernel.dim
    if isinstance(kernel, BallUniform):
        return kernel.radius**p * n / (n + p)
    if isinstance(kernel, AnnulusUniform):
        return kernel._radial_moment(p)
    if isinstance(kernel, Gaussian) and kernel.isotropic:
        s = kernel.sigma[0]
        return s**p * 2 ** (p / 2) * math.gamma((n + p) / 2) / math.gamma(n / 2)
    if isinstance(kernel, Mixture):
        return sum(w * abs_moment(c, p) for w, c in zip(kernel.weights, kernel.components))
    if p == 2:
        return sum(kernel.moment(_axis_order(n, j, 2)) for j in range(n))
    if n == 1:
        return _quad_1d(kernel, lambda x: np.abs(x) ** p)
    ext = kernel.extent(1e-14)
    val, _ = integrate.nquad(
        lambda *x: float(np.linalg.norm(x) ** p * kernel.density(np.array(x))),
        [(-e, e) for e in ext],
        opts={"epsabs": 1e-11, "epsrel": 1e-10, "limit": 200},
    )
    return val


def _quad_1d(kernel, g, weight=None, wvar=None):
    ext = float(kernel.extent(1e-16)[0])
    pts = sorted({-ext, ext, *[b for b in kernel.breakpoints() if -ext <= b <= ext]})
    total = 0.0
    err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        f = lambda x: float(g(x) * kernel.density(x))
        if weight is None:
            v, e = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
        else:
            v, e = integrate.quad(f, lo, hi, weight=weight, wvar=wvar, epsabs=1e-13, epsrel=1e-12, limit=400)
        total += v
        err += e
    if err > 1e-10:
        raise QuadratureNonConvergence(f"quadrature error {err:.3g} exceeds 1e-10")
    return total


def fourier_eval(kernel: Kernel, xi) -> complex:
    """Return k^(xi) = int exp(-i x.xi) k(x) dx."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (kernel.dim,):
        raise ValueError("xi dimension mismatch")
    if not np.any(xi):
        return 1 + 0j
    return complex(kernel.fourier(xi))


def fourier_quad(kernel: Kernel, xi: float) -> complex:
    """Adaptive-quadrature evaluation of a 1-D Fourier symbol (oracle path)."""
    if kernel.dim != 1:
        raise NotImplementedError("quadrature symbol implemented for 1-D kernels")
    xi = float(np.atleast_1d(xi)[0])
    if xi == 0:
        return complex(_quad_1d(kernel, lambda x: 1.0))
    re = _quad_1d(kernel, lambda x: 1.0, weight="cos", wvar=xi)
    im = -_quad_1d(kernel, lambda x: 1.0, weight="sin", wvar=xi)
    return complex(re, im)


def second_moments(kernel: Kernel) -> np.ndarray:
    n = kernel.dim
    m = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            o = [0] * n
            o[i] += 1
            o[j] += 1
            m[i, j] = moment(kernel, o)
    return m


def diffusion_coefficient(kernel: Kernel) -> float:
    """Return (1/2n) int |x|^2 k(x) dx, the effective local diffusivity."""
    n = kernel.dim
    return float(np.trace(second_moments(kernel))) / (2 * n)


def rescale(kernel: Kernel, eps: float) -> Kernel:
    """Return k_eps(x) = eps^-n k(x/eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return kernel.rescaled(eps)


@dataclass
class KernelReport:
    first_moments: np.ndarray
    second_moments: np.ndarray
    abs2_moment: float
    abs3_moment: float
    A: float
    prop12_satisfied: bool
    fourier_limit_estimate: float
    fourier_limit_error: float
    moment_conditions: bool = False
    fourier_condition: bool = False
    imag_slope: float = 0.0
    direction_limits: list = field(default_factory=list)


def _neville_at_zero(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Polynomial extrapolation of y(x) to x = 0 with a two-level error estimate."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(y, dtype=float).copy()
    m = len(x)
    prev = p[-1]
    # after pass j, p[i] is the degree-j interpolant through x[i..i+j] at 0
    for j in range(1, m):
        for i in range(m - j):
            p[i] = (x[i + j] * p[i] - x[i] * p[i + 1]) / (x[i + j] - x[i])
        if j == m - 2:
            prev = p[1]
    best = p[0]
    return float(best), float(abs(best - prev))


def check_prop12(
    kernel: Kernel,
    xi_sequence: Sequence[float] = (0.4, 0.2, 0.1, 0.05),
    directions: Sequence[Sequence[float]] | None = None,
    tol: float = 1e-8,
) -> KernelReport:
    """Check the moment conditions and the small-|xi| expansion of k^.

    The moment side tests zero first moments, zero mixed second moments and
    equal diagonal second moments.  The Fourier side extrapolates
    (1 - Re k^(xi))/|xi|^2 and Im k^(xi)/|xi| to xi = 0 along each direction;
    both are even in |xi| when the moments exist, so the extrapolation is
    polynomial in |xi|^2.
    """
    xs = np.abs(np.asarray(xi_sequence, dtype=float))
    if len(xs) < 4 or np.any(np.diff(xs) >= 0) or xs[-1] <= 0:
        raise ValueError("xi_sequence needs >= 4 strictly decreasing positive magnitudes")
    n = kernel.dim
    first = np.array([moment(kernel, _axis_order(n, j, 1)) for j in range(n)])
    second = second_moments(kernel)
    abs2 = float(np.trace(second))
    try:
        abs3 = abs_moment(kernel, 3)
    except (NonIntegrableMoment, QuadratureNonConvergence):
        abs3 = math.inf
    A = abs2 / (2 * n)
    scale = max(1.0, abs2)

    off = second - np.diag(np.diag(second))
    moments_ok = (
        math.isfinite(abs2)
        and np.all(np.abs(first) <= tol * scale)
        and np.all(np.abs(off) <= tol * scale)
        and np.all(np.abs(np.diag(second) - abs2 / n) <= tol * scale)
    )

    if directions is None:
        directions = [np.eye(n)[j] for j in range(n)]
        if n > 1:
            directions.append(np.ones(n))
            directions.append(np.arange(1, n + 1, dtype=float))
    dirs = [np.asarray(w, dtype=float) / np.linalg.norm(w) for w in directions]

    floor = 100 * np.finfo(float).eps / xs[-1] ** 2
    limits, errs, slopes = [], [], []
    for w in dirs:
        vals = [fourier_eval(kernel, x * w) for x in xs]
        q = np.array([(1 - v.real) / x**2 for v, x in zip(vals, xs)])
        g = np.array([v.imag / x for v, x in zip(vals, xs)])
        lim, err = _neville_at_zero(xs**2, q)
        slope, _ = _neville_at_zero(xs**2, g)
        limits.append(lim)
        errs.append(err)
        slopes.append(slope)
    limits = np.asarray(limits)
    estimate = float(np.mean(limits))
    spread = float(np.ptp(limits))
    err_bar = max(3 * max(errs), floor, tol * max(1.0, abs(estimate)))
    imag = float(np.max(np.abs(slopes)))
    fourier_ok = spread <= err_bar and imag <= max(err_bar, tol)

    agree = abs(A - estimate) <= err_bar
    if moments_ok and not (fourier_ok and agree):
        raise InconsistentKernel(
            f"moment conditions hold but Fourier limit {estimate!r} (err {err_bar:.2g}) "
            f"disagrees with A={A!r}"
        )
    return KernelReport(
        first_moments=first,
        second_moments=second,
        abs2_moment=abs2,
        abs3_moment=abs3,
        A=A,
        prop12_satisfied=bool(moments_ok and fourier_ok and agree),
        fourier_limit_estimate=estimate,
        fourier_limit_error=err_bar,
        moment_conditions=bool(moments_ok),
        fourier_condition=bool(fourier_ok),
        imag_slope=imag,
        direction_limits=list(limits),
    )


def _annulus_marginal_density(k: AnnulusUniform, x):
    m, a, b = k.n, k.inner, k.outer
    c = unit_ball_volume(m - 1) / (unit_ball_volume(m) * (b**m - a**m))
    e = (m - 1) / 2
    return c * (np.clip(b * b - x * x, 0, None) ** e - np.clip(a * a - x * x, 0, None) ** e)


def marginal_1d(kernel: Kernel, n_cells: int = 4096) -> Kernel:
    """Return k_1(x_1) = int k(x_1, x') dx'."""
    if kernel.dim < 2:
        raise ValueError("marginal_1d needs a kernel of dimension >= 2")
    if isinstance(kernel, BoxUniform):
        return BoxUniform(kernel.halfwidths[:1])
    if isinstance(kernel, Gaussian):
        return Gaussian(kernel.sigma[:1])
    if isinstance(kernel, BallUniform):
        return BallMarginal(kernel.radius, kernel.n)
    if isinstance(kernel, Mixture):
        return Mixture(kernel.weights, tuple(marginal_1d(c, n_cells) for c in kernel.components))
    if isinstance(kernel, Shifted):
        return Shifted(marginal_1d(kernel.base, n_cells), kernel.offset[:1])
    if isinstance(kernel, AnnulusUniform):
        b = kernel.outer
        dx = 2 * b / n_cells
        centers = -b + dx * (np.arange(n_cells) + 0.5)
        return Tabulated1D(centers[0], dx, _annulus_marginal_density(kernel, centers))
    raise NotImplementedError(f"no marginal for {type(kernel).__name__}")


@dataclass(frozen=True, eq=False)
class PeriodicKernel:
    """Periodic summation k_*(x) = sum_j k(x + j*period), tabulated on one period."""

    base: Kernel
    period: float
    n_cells: int = 1024
    tail_tol: float = 1e-12

    @property
    def dx(self):
        return self.period / self.n_cells

    @property
    def centers(self):
        return -0.5 * self.period + self.dx * (np.arange(self.n_cells) + 0.5)

    @property
    def n_images(self) -> int:
        ext = float(self.base.extent(self.tail_tol)[0])
        return int(math.ceil((ext + 0.5 * self.period) / self.period))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        J = self.n_images
        return sum(self.base.density(x + j * self.period) for j in range(-J, J + 1))

    @property
    def values(self) -> np.ndarray:
        v = self(self.centers)
        return v / (v.sum() * self.dx)

    def mass(self) -> float:
        return float(self.values.sum() * self.dx)


def periodize(kernel_1d: Kernel, period: float, n_cells: int = 1024) -> PeriodicKernel:
    if kernel_1d.dim != 1:
        raise ValueError("periodize needs a 1-D kernel")
    if period <= 0:
        raise ValueError("period must be positive")
    return PeriodicKernel(kernel_1d, float(period), n_cells)


def is_radially_decreasing(kernel: Kernel, n_radii: int = 400, n_dirs: int = 7) -> bool:
    """Sampled check that k is radially symmetric and nonincreasing in |x|."""
    n = kernel.dim
    R = float(np.max(kernel.extent(1e-12)))
    # cell-midpoint radii avoid landing exactly on a support edge
    r = 1.05 * R * (np.arange(n_radii) + 0.5) / n_radii
    rng = np.random.default_rng(0)
    dirs = [np.eye(n)[0]] + [v / np.linalg.norm(v) for v in rng.normal(size=(n_dirs, n))]
    if n == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    profiles = np.array([kernel.density(r[:, None] * d) for d in dirs])
    ref = profiles[0]
    scale = max(float(ref.max()), 1e-300)
    if np.max(np.abs(profiles - ref)) > 1e-12 * scale:
        return False
    return bool(np.all(np.diff(ref) <= 1e-12 * scale))
