import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nlstefan.errors import QuadratureNonConvergence
from nlstefan.kernels import (
    AnnulusUniform,
    BallMarginal,
    BallUniform,
    BoxUniform,
    Gaussian,
    Mixture,
    Mollified,
    Shifted,
    check_prop12,
    diffusion_coefficient,
    fourier_eval,
    fourier_quad,
    is_radially_decreasing,
    marginal_1d,
    moment,
    periodize,
    rescale,
    second_moments,
    unit_ball_volume,
)


def quad_moment_1d(k, p, lo, hi, points=None):
    val, _ = integrate.quad(lambda x: x**p * float(k.density(np.array([x]))), lo, hi, points=points, limit=200)
    return val


# -- moments ---------------------------------------------------------------


def test_ball_first_moment_vanishes():
    assert moment(BallUniform(1.0), (1,)) == 0.0


def test_ball_second_moment_one_third():
    k = BallUniform(1.0)
    assert moment(k, (2,)) == pytest.approx(1 / 3, rel=1e-14)
    # midpoint rule at h = 1e-4
    x = -1 + 1e-4 * (np.arange(20000) + 0.5)
    assert np.sum(x**2 * 0.5) * 1e-4 == pytest.approx(1 / 3, abs=1e-8)


def test_annulus_second_moment():
    s = 0.1
    k = AnnulusUniform(1 - s, 1 + s)
    assert moment(k, (2,)) == pytest.approx(1 + s**2 / 3, rel=1e-14)
    assert quad_moment_1d(k, 2, -1.1, 1.1, points=[-0.9, 0.9]) == pytest.approx(1 + s**2 / 3, rel=1e-10)


@pytest.mark.parametrize(
    "k,lo,hi,pts",
    [
        (Gaussian(0.7), -12, 12, None),
        (BoxUniform(0.3), -0.3, 0.3, None),
        (Mollified(AnnulusUniform(0.9, 1.1), 0.05), -1.15, 1.15, [-1.05, -0.95, -0.85, 0.85, 0.95, 1.05]),
        (Mixture((0.3, 0.7), (Gaussian(1.0), BallUniform(2.0))), -12, 12, [-2, 2]),
        (BallMarginal(1.0, 2), -1, 1, None),
    ],
)
@pytest.mark.parametrize("p", [0, 1, 2, 4])
def test_moments_match_quadrature(k, lo, hi, pts, p):
    assert moment(k, (p,)) == pytest.approx(quad_moment_1d(k, p, lo, hi, pts), rel=1e-8, abs=1e-12)


def test_shifted_moment_binomial():
    k = Shifted(Gaussian(1.0), 0.5)
    assert moment(k, (1,)) == pytest.approx(0.5)
    assert moment(k, (2,)) == pytest.approx(1.25)


def test_ball_2d_second_moments_polar():
    k = BallUniform(2.0, 2)
    m = second_moments(k)
    # polar oracle: int_0^2 r^2 * r dr * 2pi / (4 pi) = 2, split evenly over axes
    r2, _ = integrate.quad(lambda r: r**3 * 2 * math.pi / (4 * math.pi), 0, 2)
    assert np.trace(m) == pytest.approx(r2, rel=1e-12)
    assert m[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


# -- Fourier symbols ---------------------------------------------------------


@pytest.mark.parametrize("k", [Gaussian(1.0), BallUniform(1.0), AnnulusUniform(0.5, 1.0, 2), BoxUniform((1, 2))])
def test_fourier_at_zero_is_one(k):
    assert fourier_eval(k, np.zeros(k.dim)) == 1


def test_annulus_fourier_closed_form():
    s = 0.1
    k = AnnulusUniform(1 - s, 1 + s)
    expected = math.cos(2) * math.sin(2 * s) / (2 * s)
    assert fourier_eval(k, 2.0).real == pytest.approx(expected, rel=1e-12)
    assert fourier_quad(k, 2.0).real == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(-0.413378, abs=1e-6)


def test_gaussian_fourier():
    assert fourier_eval(Gaussian(1.0), 1.0).real == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert fourier_quad(Gaussian(1.0), 1.0).real == pytest.approx(math.exp(-0.5), rel=1e-9)


def test_fourier_of_shift_has_phase():
    # transform convention: int e^{-i xi x} k(x) dx
    k = Shifted(Gaussian(1.0), 0.5)
    v = fourier_eval(k, 1.0)
    assert v == pytest.approx(math.exp(-0.5) * complex(math.cos(0.5), -math.sin(0.5)), rel=1e-12)
    assert fourier_quad(k, 1.0) == pytest.approx(v, rel=1e-9)


class NoisyKernel(BoxUniform):
    """Density that changes on every evaluation, so adaptive quadrature cannot settle."""

    def density(self, x):
        rng = np.random.default_rng()
        return super().density(x) * rng.uniform(0, 2, size=np.shape(x)[:-1] or None)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_fourier_quad_reports_nonconvergence():
    with pytest.raises(QuadratureNonConvergence):
        fourier_quad(NoisyKernel(1.0), 3.0)


# -- diffusion coefficient and Fourier-side check ----------------------------


@pytest.mark.parametrize(
    "k,expected",
    [(Gaussian(0.3), 0.045), (BallUniform(1.0), 1 / 6), (BallUniform(2.0, 2), 0.5), (AnnulusUniform(0.9, 1.1), (1 + 0.01 / 3) / 2)],
)
def test_diffusion_coefficient(k, expected):
    assert diffusion_coefficient(k) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "k", [Gaussian(1.0), BallUniform(1.0), AnnulusUniform(0.9, 1.1), BallUniform(2.0, 2), Gaussian((1.0, 1.0))]
)
def test_check_accepts_symmetric_kernels(k):
    rep = check_prop12(k)
    assert rep.prop12_satisfied
    assert abs(rep.fourier_limit_estimate - rep.A) <= 1e-6 * rep.A


def test_check_gaussian_limit():
    rep = check_prop12(Gaussian(1.0), xi_sequence=(0.4, 0.2, 0.1, 0.05))
    assert rep.fourier_limit_estimate == pytest.approx(0.5, rel=1e-8)


def test_check_rejects_offset_mixture():
    k = Mixture((0.3, 0.7), (Shifted(BoxUniform(0.5), -1.0), Shifted(BoxUniform(0.5), 1.0)))
    rep = check_prop12(k)
    assert not rep.moment_conditions
    assert not rep.prop12_satisfied


def test_check_rejects_anisotropic_gaussian():
    rep = check_prop12(Gaussian((1.0, 2.0)))
    assert not rep.prop12_satisfied


def test_check_needs_four_decreasing_magnitudes():
    with pytest.raises(ValueError):
        check_prop12(Gaussian(1.0), xi_sequence=(0.1, 0.2, 0.3, 0.4))


# -- rescaling ---------------------------------------------------------------


def test_rescale_ball():
    assert rescale(BallUniform(1.0), 0.5) == BallUniform(0.5)


def test_rescale_moment_scaling():
    assert moment(rescale(BallUniform(1.0), 0.1), (2,)) == pytest.approx(0.01 / 3, rel=1e-12)


def test_rescale_fourier_scaling():
    v = fourier_eval(rescale(Gaussian(1.0), 0.2), 3.0)
    assert v.real == pytest.approx(math.exp(-0.18), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.05, 3.0), xi=st.floats(-20, 20))
def test_rescale_fourier_identity(eps, xi):
    for k in (AnnulusUniform(0.9, 1.1), BallUniform(1.0), Gaussian(0.5)):
        assert abs(fourier_eval(rescale(k, eps), xi) - fourier_eval(k, eps * xi)) < 1e-12


# -- marginals ----------------------------------------------------------------


def test_marginals_of_product_kernels():
    assert marginal_1d(BoxUniform((1.0, 1.0))) == BoxUniform(1.0)
    assert marginal_1d(Gaussian((0.4, 0.4))) == Gaussian(0.4)


def test_ball_marginal_chord():
    m = marginal_1d(BallUniform(1.0, 2))
    assert float(m.density(np.array([0.0]))) == pytest.approx(2 / math.pi, rel=1e-14)
    x = np.array([0.3])
    assert float(m.density(x)) == pytest.approx(2 * math.sqrt(1 - 0.09) / math.pi, rel=1e-14)


def test_annulus_marginal_has_unit_mass_and_matching_moment():
    m = marginal_1d(AnnulusUniform(0.5, 1.0, 2))
    assert moment(m, (0,)) == pytest.approx(1.0, rel=1e-12)
    assert moment(m, (2,)) == pytest.approx(second_moments(AnnulusUniform(0.5, 1.0, 2))[0, 0], rel=1e-5)


# -- periodization ---------------------------------------------------------------


def test_periodize_compact_kernel_unchanged():
    pk = periodize(BoxUniform(0.5), 10.0, 1000)
    x = np.array([-4.9, -0.4, 0.0, 0.45, 3.0])
    assert np.allclose(pk(x), BoxUniform(0.5).density(x))


def test_periodize_gaussian_image_sum():
    pk = periodize(Gaussian(1.0), 4.0)
    oracle = sum(stats.norm.pdf(4.0 * j) for j in range(-20, 21))
    assert float(pk(np.array([0.0]))) == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(0.39894228 + 2 * stats.norm.pdf(4.0), rel=1e-7)


def test_periodize_mass():
    assert periodize(Gaussian(1.0), 3.0).mass() == pytest.approx(1.0, abs=1e-10)


# -- radial monotonicity ----------------------------------------------------------


@pytest.mark.parametrize(
    "k,expected",
    [
        (BallUniform(1.0, 2), True),
        (Gaussian((0.3, 0.3)), True),
        (Gaussian(1.0), True),
        (AnnulusUniform(0.5, 1.0, 2), False),
        (BoxUniform((1.0, 1.0)), False),
        (Gaussian((0.3, 0.6)), False),
    ],
)
def test_radially_decreasing(k, expected):
    assert is_radially_decreasing(k) is expected


# -- properties ------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.1, 5.0), p=st.integers(0, 6))
def test_ball_moment_closed_form(r, p):
    # even moments r^p/(p+1), odd moments vanish
    expected = 0.0 if p % 2 else r**p / (p + 1)
    assert moment(BallUniform(r), (p,)) == pytest.approx(expected, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(w=st.floats(0.05, 0.95), s=st.floats(0.1, 2.0), xi=st.floats(-10, 10))
def test_mixture_fourier_is_weighted_sum(w, s, xi):
    a, b = Gaussian(s), BallUniform(s)
    m = Mixture((w, 1 - w), (a, b))
    assert abs(fourier_eval(m, xi) - (w * fourier_eval(a, xi) + (1 - w) * fourier_eval(b, xi))) < 1e-14
    assert abs(fourier_eval(m, xi)) <= 1 + 1e-14
