import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nlstefan.config import apply_overrides, build_kernel, parse_config, render_config
from nlstefan.domains import TabulatedInitial
from nlstefan.errors import FormatError, ParseError, ValidationError
from nlstefan.experiments import run_example1
from nlstefan.fronts import FrontTrace
from nlstefan.grid import Field, build_grid
from nlstefan.io import emit_error_table, emit_front_csv, export_csv, fmt, read_snapshot, write_snapshot
from nlstefan.kernels import AnnulusUniform, Gaussian, Mixture, Mollified, Shifted
from nlstefan.onephase import OnePhaseConfig
from nlstefan.twophase import TwoPhaseConfig

EXAMPLE1 = """\
# annulus kernel, interval initial data
[run]
mode = simulate-1p
output_dir = out/ex1

[kernel]
family = annulus
params = 0.9, 1.1
dim = 1

[onephase]
lower = -2
upper = 2
h = 0.00390625
shape = interval
region_lower = -0.25
region_upper = 0.25
c0 = 4
dt = 1e-3
t_end = 1
"""

TWOPHASE = """\
[run]
mode = simulate-2p

[kernel]
family = ball
params = 0.25

[twophase]
lower = -2
upper = 2
h = 0.015625
shape = interval
region_lower = -0.5
region_upper = 0.5
c0 = 1
c1 = -2
alpha0 = 0.5
"""


# -- snapshots ------------------------------------------------------------------------


def test_snapshot_round_trip(tmp_path):
    g = build_grid([-1, 0], [1, 0.5], 0.125)
    rng = np.random.default_rng(0)
    f = Field(g, rng.normal(size=g.shape), -0.75)
    write_snapshot(f, tmp_path / "a.nsf", t=0.1 + 0.2)
    back, t = read_snapshot(tmp_path / "a.nsf")
    assert back.values.tobytes() == f.values.tobytes()
    assert back.grid == g and back.exterior == -0.75 and t == 0.1 + 0.2


@settings(max_examples=40, deadline=None)
@given(
    v=hnp.arrays(float, (6, 5), elements=st.floats(allow_nan=False, allow_infinity=False)),
    ext=st.floats(allow_nan=False, allow_infinity=False),
    lower=st.floats(-1e6, 1e6),
    h=st.floats(1e-6, 1e3),
)
def test_snapshot_round_trip_property(tmp_path_factory, v, ext, lower, h):
    g = build_grid([lower, 0.0], [lower + 6 * h, 5 * h], h)
    if g.counts != (6, 5):
        return
    path = tmp_path_factory.mktemp("snap") / "f.nsf"
    write_snapshot(Field(g, v, ext), path, t=1.5)
    back, t = read_snapshot(path)
    assert back.values.tobytes() == np.ascontiguousarray(v, dtype="<f8").tobytes()
    assert back.exterior == ext and back.grid.lower == g.lower and back.grid.h == h


def test_snapshot_wrong_counts(tmp_path):
    g = build_grid([0], [1], 0.125)
    path = tmp_path / "b.nsf"
    write_snapshot(Field(g, np.arange(8.0)), path)
    raw = path.read_bytes().replace(b"counts=8", b"counts=9")
    path.write_bytes(raw)
    with pytest.raises(FormatError):
        read_snapshot(path)


@pytest.mark.parametrize("blob", [b"", b"hello\n", b"NSFIELD v2 dim=1\n", b"NSFIELD v1 dim=1 counts=4\n"])
def test_snapshot_bad_headers(tmp_path, blob):
    path = tmp_path / "c.nsf"
    path.write_bytes(blob)
    with pytest.raises(FormatError):
        read_snapshot(path)


def test_csv_export_row_count(tmp_path):
    g = build_grid([0, 0, 0], [1, 0.5, 0.5], 0.125)
    n = export_csv(Field(g, np.zeros(g.shape)), tmp_path / "f.csv")
    assert n == 8 * 4 * 4
    with open(tmp_path / "f.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i0", "i1", "i2", "x0", "x1", "x2", "value"]
    assert len(rows) == n + 1


# -- CSV tables ------------------------------------------------------------------------


def test_empty_error_table(tmp_path):
    emit_error_table([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines() == ["eps,t,l1_error"]


def test_error_table_ordering_and_precision(tmp_path):
    emit_error_table([(0.1, 0.2, 1 / 3), (0.4, 0.1, 0.5), (0.4, 0.05, 0.25)], tmp_path / "e.csv")
    rows = list(csv.reader(open(tmp_path / "e.csv")))[1:]
    assert [float(r[0]) for r in rows] == [0.4, 0.4, 0.1]
    assert [float(r[1]) for r in rows] == [0.05, 0.1, 0.2]
    assert float(rows[-1][2]) == 1 / 3


@settings(max_examples=100)
@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_front_csv_for_example1(tmp_path):
    rep = run_example1()
    emit_front_csv(rep.result.trace, tmp_path / "front.csv")
    rows = list(csv.DictReader(open(tmp_path / "front.csv")))
    assert list(rows[0]) == ["t", "measure", "components", "radius"]
    t = [float(r["t"]) for r in rows]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert rows[-1]["components"] == "3"
    assert set(r["components"] for r in rows[:-1]) == {"1"}


def test_front_csv_empty_trace(tmp_path):
    emit_front_csv(FrontTrace(), tmp_path / "front.csv")
    assert (tmp_path / "front.csv").read_text().strip() == "t,measure,components,radius"


# -- configuration ----------------------------------------------------------------------


def test_example1_config_parses():
    rc = parse_config(EXAMPLE1)
    assert rc.mode == "simulate-1p" and rc.output_dir == "out/ex1" and rc.snapshot_every == 10
    cfg = rc.built
    assert isinstance(cfg, OnePhaseConfig)
    assert cfg.kernel == AnnulusUniform(0.9, 1.1)
    assert cfg.dt == 1e-3 and cfg.h == 1 / 256


def test_unstable_dt_in_config():
    with pytest.raises(ValidationError) as err:
        parse_config(EXAMPLE1.replace("dt = 1e-3", "dt = 1.5"))
    assert err.value.field == "dt" and err.value.constraint == "dt·d/eps² ≤ 1"


def test_alpha0_in_config():
    assert isinstance(parse_config(TWOPHASE).built, TwoPhaseConfig)
    with pytest.raises(ValidationError) as err:
        parse_config(TWOPHASE.replace("alpha0 = 0.5", "alpha0 = 1.0"))
    assert err.value.field == "alpha0" and err.value.constraint == "0 < α₀ < ℓ₀"


def test_parse_errors_carry_line_numbers():
    text = "[run]\nmode = simulate-1p\nnonsense\n[bogus]\n[onephase]\nh = \n"
    with pytest.raises(ParseError) as err:
        parse_config(text)
    lines = [ln for ln, _ in err.value.errors]
    assert lines == [3, 4, 6]
    assert err.value.line == 3


def test_unknown_key_rejected():
    with pytest.raises(ParseError):
        parse_config(EXAMPLE1.replace("c0 = 4", "c0 = 4\nspeed = 3"))


def test_exactly_one_mode_section():
    with pytest.raises(ValidationError):
        parse_config(EXAMPLE1 + "\n[twophase]\nh = 0.1\n")
    with pytest.raises(ValidationError):
        parse_config(EXAMPLE1.replace("mode = simulate-1p", "mode = simulate-2p"))


def test_non_decimal_number_rejected():
    with pytest.raises(ValidationError):
        parse_config(EXAMPLE1.replace("c0 = 4", "c0 = four"))
    with pytest.raises(ValidationError):
        parse_config(EXAMPLE1.replace("c0 = 4", "c0 = nan"))


def test_render_parse_fixed_point():
    rc = parse_config(EXAMPLE1)
    text = render_config(rc)
    assert parse_config(text) == rc
    assert render_config(parse_config(text)) == text


@settings(max_examples=40, deadline=None)
@given(
    c0=st.floats(0.01, 100),
    h=st.sampled_from([0.5, 0.25, 0.125, 0.0625]),
    every=st.integers(1, 1000),
    sigma=st.floats(0.05, 0.5),
    region=st.tuples(st.floats(-1, 0), st.floats(0.01, 1)),
)
def test_render_parse_fixed_point_property(c0, h, every, sigma, region):
    text = f"""
[run]
mode = simulate-1p
snapshot_every = {every}
[kernel]
family = gaussian
params = {sigma!r}
[onephase]
lower = -8
upper = 8
h = {h!r}
shape = interval
region_lower = {region[0]!r}
region_upper = {region[1]!r}
c0 = {c0!r}
"""
    rc = parse_config(text)
    again = parse_config(render_config(rc))
    assert again == rc
    assert render_config(again) == render_config(rc)


def test_overrides_replace_values():
    rc = apply_overrides(EXAMPLE1, ["onephase.c0=3", "run.snapshot_every=5", "kernel.params=0.8,1.2"])
    assert rc.built.initial.c0 == 3.0 and rc.snapshot_every == 5
    assert rc.built.kernel == AnnulusUniform(0.8, 1.2)
    with pytest.raises(ValidationError):
        apply_overrides(EXAMPLE1, ["onephase.nosuch=1"])
    with pytest.raises(ValidationError):
        apply_overrides(EXAMPLE1, ["c0=3"])


def test_mixture_kernel_sections():
    sections = {
        "kernel": {"family": "mixture", "weights": "1, 3"},
        "kernel.0": {"family": "gaussian", "params": "1"},
        "kernel.1": {"family": "annulus", "params": "0.9, 1.1", "mollify": "0.01", "shift": "0.5"},
    }
    k = build_kernel(sections)
    assert isinstance(k, Mixture) and k.weights == (0.25, 0.75)
    assert k.components[0] == Gaussian(1.0)
    assert k.components[1] == Mollified(Shifted(AnnulusUniform(0.9, 1.1), 0.5), 0.01)


def test_initial_file(tmp_path):
    g = build_grid([-2], [2], 1 / 256)
    v = np.full(g.shape, -1.0)
    v[500:524] = 2.0
    write_snapshot(Field(g, v, -1.0), tmp_path / "g0.nsf")
    text = EXAMPLE1.replace("shape = interval\nregion_lower = -0.25\nregion_upper = 0.25\nc0 = 4\n",
                            f"initial_file = {tmp_path / 'g0.nsf'}\n")
    cfg = parse_config(text).built
    assert isinstance(cfg.initial, TabulatedInitial)
    assert math.isclose(cfg.initial.projection()[1] - cfg.initial.projection()[0], 24 / 256)
