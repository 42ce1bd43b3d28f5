import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nlstefan.domains import Ball, Box, InitialData, TabulatedInitial
from nlstefan.errors import DomainTooSmall, ValidationError
from nlstefan.grid import Field, build_grid
from nlstefan.kernels import AnnulusUniform, BallUniform, Gaussian, Mollified
from nlstefan.onephase import (
    OnePhaseConfig,
    OnePhaseProblem,
    StefanState,
    comparison_check,
    first_touch_times,
    picard_solution,
    run,
    strong_positivity_check,
)

H = 1 / 256
DT = 1e-3


def example1_config(kernel=None, c0=4.0, t_end=0.8, half_width=3.0, every=1):
    kernel = AnnulusUniform(0.9, 1.1) if kernel is None else kernel
    return OnePhaseConfig(kernel, InitialData(Box([-0.25], [0.25]), c0), [-half_width], [half_width], H,
                          dt=DT, t_end=t_end, snapshot_every=every)


@pytest.fixture(scope="module")
def example1():
    return run(example1_config(), on_margin="stop")


def small_config(**kw):
    base = dict(kernel=BallUniform(0.25), initial=InitialData(Box([-0.25], [0.25]), 2.0), lower=[-2], upper=[2],
                h=1 / 32, t_end=0.5, snapshot_every=1)
    base.update(kw)
    return OnePhaseConfig(**base)


# -- configuration guards -------------------------------------------------------


def test_default_dt_is_stable():
    cfg = small_config(eps=0.5, d=2.0)
    assert cfg.dt == pytest.approx(0.25 * 0.25 / 2)


def test_unstable_dt_rejected():
    with pytest.raises(ValidationError) as err:
        small_config(dt=1.5)
    assert err.value.field == "dt" and err.value.constraint == "dt·d/eps² ≤ 1"


def test_zero_initial_data_rejected():
    prob = OnePhaseProblem(small_config(initial=InitialData(Box([-0.25], [0.25]), 0.0)))
    with pytest.raises(ValidationError):
        prob.init_state()


def test_negative_tabulated_data_rejected():
    g = build_grid([-2], [2], 1 / 32)
    v = np.full(g.shape, -1.0)
    v[60:68] = 1.0
    v[63] = -0.5
    prob = OnePhaseProblem(small_config(initial=TabulatedInitial(Field(g, v, -1.0))))
    with pytest.raises(ValidationError):
        prob.init_state()


def test_region_too_close_to_box_edge():
    prob = OnePhaseProblem(small_config(initial=InitialData(Box([1.6], [1.9]), 1.0)))
    with pytest.raises(DomainTooSmall):
        prob.init_state()


# -- right-hand side ----------------------------------------------------------------


def test_rhs_vanishes_without_liquid():
    prob = OnePhaseProblem(small_config())
    st_ = StefanState(Field.constant(prob.grid, -1.0))
    assert np.all(prob.rhs(st_).values == 0)
    assert np.array_equal(prob.step(st_).gamma.values, st_.gamma.values)


def test_rhs_of_constant_liquid():
    prob = OnePhaseProblem(small_config())
    r = prob.rhs_values(np.full(prob.grid.shape, 3.0))
    k = prob.kernel.radius_cells
    assert np.all(r[k:-k] == pytest.approx(0.0, abs=1e-13))
    assert np.all(r <= 1e-13)
    assert r[0] < 0


def test_example1_rhs_is_pure_decay():
    cfg = example1_config()
    prob = OnePhaseProblem(cfg)
    g0 = prob.init_state().gamma.values
    region = cfg.initial.region(prob.grid)
    assert np.array_equal(prob.rhs_values(g0)[region], -g0[region])


def test_example1_interior_decay(example1):
    t, f = next((t, f) for t, f in example1.snapshots if abs(t - 0.5) < 1e-9)
    g = f.grid
    inside = np.abs(g.axis(0)) <= 0.25
    assert np.all(np.abs(f.values[inside] - 4 * math.exp(-0.5)) <= 2 * DT)


# -- qualitative behaviour ---------------------------------------------------------


def test_example1_first_touch(example1):
    g = example1.first_touch.grid
    s = example1.first_touch.values
    i1 = g.index_of([1.0])
    assert abs(s[i1] - math.log(2)) <= 2 * DT + 2 * H
    assert np.isnan(s[g.index_of([0.5])])
    region = np.abs(g.axis(0)) <= 0.25
    assert np.all(s[region] == 0)


def test_example1_waiting_time(example1):
    s = example1.first_touch.values
    outside = np.abs(example1.first_touch.grid.axis(0)) > 0.25
    touched = s[outside & ~np.isnan(s)]
    assert touched.size and touched.min() >= 1 / 4 - DT


def test_example1_monotone_and_positive(example1):
    assert example1.trace.monotone
    assert example1.strongly_positive
    assert strong_positivity_check(example1.snapshots)


def test_example1_component_jump(example1):
    counts = example1.trace.component_counts
    k = counts.index(3)
    assert set(counts[:k]) == {1}


def test_first_touch_from_snapshots_agrees(example1):
    s = first_touch_times(example1.snapshots).values
    assert np.allclose(s, example1.first_touch.values, equal_nan=True)


def test_strong_positivity_trivial_and_violated(example1):
    assert strong_positivity_check(example1.snapshots[:1])
    snaps = [(t, f.copy()) for t, f in example1.snapshots[:5]]
    g = snaps[0][1].grid
    snaps[-1][1].values[g.index_of([0.0])] = -1.0
    assert not strong_positivity_check(snaps)


def test_mollified_kernel_keeps_strong_positivity():
    cfg = example1_config(kernel=Mollified(AnnulusUniform(0.9, 1.1), H), t_end=0.75)
    res = run(cfg, on_margin="stop")
    assert res.strongly_positive and res.trace.monotone


def test_subcritical_data_never_touches():
    res = run(example1_config(c0=1.5, t_end=4.0, every=100))
    outside = np.abs(res.first_touch.grid.axis(0)) > 0.25
    assert np.all(np.isnan(res.first_touch.values[outside]))


def test_boundedness_of_front():
    cfg = OnePhaseConfig(Gaussian((0.25, 0.25)), InitialData(Ball((0, 0), 0.5), 1.0), [-3, -3], [3, 3], 1 / 16,
                         t_end=80, snapshot_every=50, tail_tol=1e-10)
    res = run(cfg, quiescence=1e-6)
    assert res.stopped == "quiescent"
    r = res.trace.enclosing_radius
    assert max(r) < 2.0
    tail = r[int(0.8 * len(r)):]
    assert max(tail) == min(tail)


def test_margin_guard_raises():
    with pytest.raises(DomainTooSmall):
        run(example1_config(half_width=2.0, t_end=1.0))


def test_heun_integrator_close_to_euler():
    a = run(small_config(dt=1e-3, t_end=0.2, snapshot_every=200)).state.gamma.values
    b = run(small_config(dt=1e-3, t_end=0.2, snapshot_every=200, integrator="heun")).state.gamma.values
    assert np.max(np.abs(a - b)) < 1e-3


# -- comparison principle ----------------------------------------------------------


def test_comparison_identical_data():
    cfg = small_config()
    assert comparison_check(cfg, cfg, n_steps=50, slack=0.0)


def test_comparison_raised_data():
    cfg = small_config()
    g = OnePhaseProblem(cfg).grid
    base = cfg.initial.values(g, -1.0)
    region = cfg.initial.region(g)
    star = small_config(initial=TabulatedInitial(Field(g, np.where(region, base + 0.5, base), -1.0)))
    assert comparison_check(cfg, star, n_steps=100)


def field_initial(grid, values):
    return TabulatedInitial(Field(grid, values, -1.0))


@settings(max_examples=20, deadline=None)
@given(
    base=hnp.arrays(float, 16, elements=st.floats(0.01, 3.0)),
    bump=hnp.arrays(float, 16, elements=st.floats(0.0, 2.0)),
    dt_frac=st.floats(0.1, 1.0),
)
def test_comparison_property(base, bump, dt_frac):
    g = build_grid([-1], [1], 1 / 32)
    lo = np.full(g.shape, -1.0)
    hi = np.full(g.shape, -1.0)
    lo[24:40] = base
    hi[24:40] = base + bump
    kw = dict(kernel=BallUniform(0.125), lower=[-1], upper=[1], h=1 / 32, dt=dt_frac, t_end=1.0)
    a = OnePhaseProblem(OnePhaseConfig(initial=field_initial(g, lo), **kw))
    b = OnePhaseProblem(OnePhaseConfig(initial=field_initial(g, hi), **kw))
    x, y = lo.copy(), hi.copy()
    for _ in range(15):
        if not (a.margin_ok(x) and b.margin_ok(y)):
            break
        x, y = a.advance(x, dt_frac), b.advance(y, dt_frac)
        assert np.all(y >= x - 1e-12)


@settings(max_examples=20, deadline=None)
@given(base=hnp.arrays(float, 16, elements=st.floats(0.01, 5.0)), dt_frac=st.floats(0.05, 1.0))
def test_max_principle_property(base, dt_frac):
    g = build_grid([-1], [1], 1 / 32)
    v = np.full(g.shape, -1.0)
    v[24:40] = base
    prob = OnePhaseProblem(OnePhaseConfig(BallUniform(0.125), field_initial(g, v), [-1], [1], 1 / 32, dt=dt_frac))
    lo, hi = v.min(), v.max()
    for _ in range(15):
        if not prob.margin_ok(v):
            break
        v = prob.advance(v, dt_frac)
        assert lo - 1e-12 <= v.min() and v.max() <= hi + 1e-12


# -- time-integration oracle ---------------------------------------------------------


def test_euler_tracks_picard_solution():
    cfg = small_config(dt=0.01, kernel=BallUniform(0.5), initial=InitialData(Box([-0.5], [0.5]), 2.0), upper=[3],
                       lower=[-3])
    prob = OnePhaseProblem(cfg)
    g0 = prob.init_state().gamma.values
    v = g0.copy()
    for _ in range(20):
        v = prob.advance(v, cfg.dt)
    ref = picard_solution(prob, g0, 20 * cfg.dt)
    assert np.max(np.abs(v - ref)) <= 5 * cfg.dt * cfg.d * np.abs(g0).max()
    # trapezoid Picard is second order; refining the time grid changes little
    ref2 = picard_solution(prob, g0, 20 * cfg.dt, nodes=321)
    assert np.max(np.abs(ref - ref2)) < 1e-5
