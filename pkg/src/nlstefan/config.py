"""Line-oriented run configuration.

Grammar::

    # comment
    [section]
    key = value          # numbers, words, or comma-separated vectors

``[run]`` holds ``mode``, ``output_dir`` and ``snapshot_every``; kernels are
described in ``[kernel]`` (and ``[kernel_eta]`` for the solid phase), with
mixture components in ``[kernel.0]``, ``[kernel.1]``, ...; the parameters of
the chosen mode live in the mode's own section.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any

from .domains import Ball, Box, InitialData, Shell, TabulatedInitial
from .errors import ParseError, ValidationError
from .io import read_snapshot
from .local import LocalConfig
from .onephase import OnePhaseConfig
from .twophase import TwoPhaseConfig
from .kernels import (
    AnnulusUniform,
    BallMarginal,
    BallUniform,
    BoxUniform,
    Gaussian,
    Kernel,
    Mixture,
    Mollified,
    Shifted,
)

__all__ = [
    "MODES",
    "RunConfig",
    "parse_config",
    "render_config",
    "apply_overrides",
    "build_kernel",
    "build_initial",
    "build_mode_config",
]

# mode -> section holding its parameters
MODES = {
    "kernel-check": "kernel-check",
    "simulate-1p": "onephase",
    "simulate-2p": "twophase",
    "local-ref": "local",
    "jump-example1": "example1",
    "jump-example2": "example2",
    "continuity": "continuity",
    "boundedness": "boundedness",
    "converge": "converge",
}

_DOMAIN_KEYS = {"lower", "upper", "h"}
_INITIAL_KEYS = {"shape", "region_lower", "region_upper", "center", "radius", "inner", "outer",
                 "c0", "c1", "split", "initial_file"}
_RUN_KEYS = {"dt", "t_end", "tail_tol", "conv_method", "integrator"}
_KEYS = {
    "run": {"mode", "output_dir", "snapshot_every"},
    "kernel": {"family", "params", "dim", "mollify", "shift", "weights", "weight"},
    "onephase": _DOMAIN_KEYS | _INITIAL_KEYS | _RUN_KEYS | {"ell0", "d", "eps", "quiescence"},
    "boundedness": _DOMAIN_KEYS | _INITIAL_KEYS | _RUN_KEYS | {"ell0", "d", "eps", "quiescence"},
    "twophase": _DOMAIN_KEYS | _INITIAL_KEYS | _RUN_KEYS | {"ell0", "a", "b", "alpha0", "eps"},
    "local": _DOMAIN_KEYS | _INITIAL_KEYS | {"problem", "A", "B", "ell0", "exterior", "dt", "t_end",
                                            "vi_tolerance", "max_sweeps", "boundary"},
    "example1": {"sigma", "c0", "ell0", "d", "mollify_rho", "h", "dt", "half_width", "t_end",
                 "allow_outside_claim"},
    "example2": {"n", "c0", "ell0", "h", "dt", "half_width", "t_end", "allow_outside_claim"},
    "continuity": _INITIAL_KEYS | {"h", "half_width", "ell0", "dt", "t_end", "tail_tol", "quiescence"},
    "converge": {"kind", "eps", "h", "half_width", "t_end", "c0", "ell0", "alpha0", "n_times",
                 "dt_max", "reference_dt"},
    "kernel-check": {"xi", "tol"},
}

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.\-]+)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _section_kind(name: str) -> str | None:
    base = name.split(".")[0]
    if base in ("kernel", "kernel_eta"):
        return "kernel"
    return name if name in _KEYS else None


@dataclass
class RunConfig:
    mode: str
    output_dir: str
    snapshot_every: int
    sections: dict[str, dict[str, str]]
    built: Any = field(default=None, compare=False, repr=False)

    @property
    def mode_section(self) -> dict[str, str]:
        return self.sections[MODES[self.mode]]


# ---------------------------------------------------------------------------
# lexing


def _lex(text: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    errors: list[tuple[int, str]] = []
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            current = m.group(1)
            if current in sections:
                errors.append((lineno, f"duplicate section [{current}]"))
            elif _section_kind(current) is None:
                errors.append((lineno, f"unknown section [{current}]"))
            sections.setdefault(current, {})
            continue
        if line.startswith("["):
            errors.append((lineno, f"malformed section header {line!r}"))
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            errors.append((lineno, f"expected 'key = value', got {line!r}"))
            continue
        if current is None:
            errors.append((lineno, "key outside of any section"))
            continue
        if not _KEY_RE.match(key):
            errors.append((lineno, f"invalid key {key!r}"))
            continue
        if not value:
            errors.append((lineno, f"empty value for {key}"))
            continue
        if key in sections[current]:
            errors.append((lineno, f"duplicate key {key} in [{current}]"))
            continue
        kind = _section_kind(current)
        if kind is not None and key not in _KEYS[kind]:
            errors.append((lineno, f"unknown key {key} in [{current}]"))
            continue
        sections[current][key] = ", ".join(p.strip() for p in value.split(","))
    if errors:
        raise ParseError(errors)
    return sections


# ---------------------------------------------------------------------------
# typed access


class _Section:
    """Typed reader over one section's raw strings."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = raw

    def has(self, key):
        return key in self.raw

    def _field(self, key):
        return f"{self.name}.{key}"

    def str(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ValidationError(self._field(key), "required")
            return default
        return self.raw[key]

    def float(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ValidationError(self._field(key), "required")
            return default
        try:
            x = float(self.raw[key])
        except ValueError:
            raise ValidationError(self._field(key), "decimal number") from None
        if not math.isfinite(x):
            raise ValidationError(self._field(key), "finite number")
        return x

    def opt_float(self, key):
        return self.float(key) if key in self.raw else None

    def int(self, key, default=None):
        x = self.float(key, default)
        if x != int(x):
            raise ValidationError(self._field(key), "integer")
        return int(x)

    def vec(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ValidationError(self._field(key), "required")
            return tuple(default)
        try:
            out = tuple(float(p) for p in self.raw[key].split(","))
        except ValueError:
            raise ValidationError(self._field(key), "comma-separated decimal numbers") from None
        if not all(math.isfinite(x) for x in out):
            raise ValidationError(self._field(key), "finite numbers")
        return out

    def bool(self, key, default=False):
        if key not in self.raw:
            return default
        v = self.raw[key].lower()
        if v in ("true", "yes", "1"):
            return True
        if v in ("false", "no", "0"):
            return False
        raise ValidationError(self._field(key), "true or false")


def build_kernel(sections: dict[str, dict[str, str]], name: str = "kernel") -> Kernel:
    """Kernel described by section ``name`` (mixtures pull components from ``name.0``, ...)."""
    if name not in sections:
        raise ValidationError(name, "section required")
    s = _Section(name, sections[name])
    family = s.str("family").lower()
    dim = s.int("dim", 1)
    if dim < 1:
        raise ValidationError(f"{name}.dim", "dim ≥ 1")
    if family == "mixture":
        parts = sorted((k for k in sections if k.startswith(name + ".") and k[len(name) + 1:].isdigit()),
                       key=lambda k: int(k.rsplit(".", 1)[1]))
        if not parts:
            raise ValidationError(f"{name}.family", "mixture needs [kernel.0], [kernel.1], ... sections")
        comps = tuple(build_kernel(sections, p) for p in parts)
        if s.has("weights"):
            weights = s.vec("weights")
        else:
            weights = tuple(_Section(p, sections[p]).float("weight") for p in parts)
        if len(weights) != len(comps):
            raise ValidationError(f"{name}.weights", "one weight per component")
        total = sum(weights)
        if min(weights) <= 0 or total <= 0:
            raise ValidationError(f"{name}.weights", "positive weights")
        kernel: Kernel = Mixture(tuple(w / total for w in weights), comps)
    else:
        p = s.vec("params")
        try:
            kernel = _family(family, p, dim)
        except ValueError as exc:
            raise ValidationError(f"{name}.params", str(exc)) from None
    if s.has("shift"):
        off = s.vec("shift")
        if len(off) != kernel.dim:
            raise ValidationError(f"{name}.shift", "one offset per dimension")
        kernel = Shifted(kernel, off)
    if s.has("mollify"):
        rho = s.float("mollify")
        if kernel.dim != 1 or rho <= 0:
            raise ValidationError(f"{name}.mollify", "ρ > 0 on a 1-D kernel")
        kernel = Mollified(kernel, rho)
    return kernel


def _family(family: str, p: tuple[float, ...], dim: int) -> Kernel:
    def need(k):
        if len(p) != k:
            raise ValueError(f"{family} takes {k} parameter(s)")

    if family == "annulus":
        need(2)
        return AnnulusUniform(p[0], p[1], dim)
    if family == "ball":
        need(1)
        return BallUniform(p[0], dim)
    if family == "box":
        return BoxUniform(p * dim if len(p) == 1 else p)
    if family == "gaussian":
        return Gaussian(p * dim if len(p) == 1 else p)
    if family == "ball-marginal":
        need(2)
        return BallMarginal(p[0], int(p[1]))
    raise ValueError(f"unknown kernel family {family!r}")


def build_initial(s: _Section, dim: int, grid_factory=None):
    """Initial data from the shape/profile keys (or a tabulated snapshot file)."""
    if s.has("initial_file"):
        field_, _ = read_snapshot(s.str("initial_file"))
        return TabulatedInitial(field_)
    shape = s.str("shape").lower()
    if shape in ("box", "interval"):
        lo, hi = s.vec("region_lower"), s.vec("region_upper")
        if len(lo) != dim or len(hi) != dim or any(b <= a for a, b in zip(lo, hi)):
            raise ValidationError(f"{s.name}.region_lower", "region_lower < region_upper, one entry per axis")
        geom = Box(lo, hi)
    elif shape == "ball":
        c = s.vec("center", (0.0,) * dim)
        r = s.float("radius")
        if len(c) != dim or r <= 0:
            raise ValidationError(f"{s.name}.radius", "radius > 0 and center of matching dimension")
        geom = Ball(c, r)
    elif shape == "shell":
        c = s.vec("center", (0.0,) * dim)
        a, b = s.float("inner"), s.float("outer")
        if len(c) != dim or not 0 <= a < b:
            raise ValidationError(f"{s.name}.inner", "0 ≤ inner < outer")
        geom = Shell(c, a, b)
    else:
        raise ValidationError(f"{s.name}.shape", "shape in {box, interval, ball, shell}")
    return InitialData(geom, s.float("c0"), s.opt_float("c1"), s.opt_float("split"))


def _domain(s: _Section):
    lower, upper = s.vec("lower"), s.vec("upper")
    if len(lower) != len(upper):
        raise ValidationError(f"{s.name}.upper", "lower and upper of equal length")
    h = s.float("h")
    if h <= 0:
        raise ValidationError(f"{s.name}.h", "h > 0")
    return lower, upper, h


def build_mode_config(rc: RunConfig):
    """Typed configuration object (or keyword dict) for the run's mode."""
    sec_name = MODES[rc.mode]
    s = _Section(sec_name, rc.sections[sec_name])
    every = rc.snapshot_every

    if rc.mode in ("simulate-1p", "boundedness"):
        kernel = build_kernel(rc.sections)
        lower, upper, h = _domain(s)
        cfg = OnePhaseConfig(
            kernel, build_initial(s, len(lower)), lower, upper, h,
            ell0=s.float("ell0", 1.0), d=s.float("d", 1.0), eps=s.float("eps", 1.0),
            dt=s.opt_float("dt"), t_end=s.float("t_end", 1.0), snapshot_every=every,
            tail_tol=s.float("tail_tol", 1e-12), conv_method=s.str("conv_method", "auto"),
            integrator=s.str("integrator", "euler"),
        )
        return cfg
    if rc.mode == "simulate-2p":
        k = build_kernel(rc.sections, "kernel")
        eta = build_kernel(rc.sections, "kernel_eta") if "kernel_eta" in rc.sections else k
        lower, upper, h = _domain(s)
        return TwoPhaseConfig(
            k, eta, build_initial(s, len(lower)), lower, upper, h,
            a=s.float("a", 1.0), b=s.float("b", 1.0), ell0=s.float("ell0", 1.0),
            alpha0=s.float("alpha0", 0.5 * s.float("ell0", 1.0)), eps=s.float("eps", 1.0),
            dt=s.opt_float("dt"), t_end=s.float("t_end", 1.0), snapshot_every=every,
            tail_tol=s.float("tail_tol", 1e-12), conv_method=s.str("conv_method", "auto"),
            integrator=s.str("integrator", "euler"),
        )
    if rc.mode == "local-ref":
        lower, upper, h = _domain(s)
        problem = s.str("problem", "obstacle")
        if problem not in ("obstacle", "enthalpy"):
            raise ValidationError(f"{sec_name}.problem", "problem in {obstacle, enthalpy}")
        cfg = LocalConfig(
            s.float("A"), build_initial(s, len(lower)), lower, upper, h,
            B=s.float("B", 1.0), ell0=s.float("ell0", 1.0), exterior=s.opt_float("exterior"),
            dt=s.opt_float("dt"), t_end=s.float("t_end", 1.0), snapshot_every=every,
            vi_tolerance=s.float("vi_tolerance", 1e-10), max_sweeps=s.int("max_sweeps", 20000),
            boundary=s.str("boundary", "dirichlet"),
        )
        return {"problem": problem, "config": cfg}
    if rc.mode == "jump-example1":
        out = dict(sigma=s.float("sigma", 0.1), c0=s.float("c0", 4.0), ell0=s.float("ell0", 1.0),
                   d=s.float("d", 1.0), mollify_rho=s.opt_float("mollify_rho"), h=s.float("h", 1 / 256),
                   dt=s.float("dt", 1e-3), half_width=s.float("half_width", 2.0), t_end=s.float("t_end", 5.0),
                   allow_outside_claim=s.bool("allow_outside_claim"))
        if out["dt"] * out["d"] > 1:
            raise ValidationError("dt", "dt·d/eps² ≤ 1")
        return out
    if rc.mode == "jump-example2":
        out = dict(n=s.int("n", 2), c0=s.float("c0", 2.0), ell0=s.float("ell0", 1.0), h=s.float("h", 1 / 64),
                   dt=s.float("dt", 1e-3), half_width=s.float("half_width", 4.0), t_end=s.float("t_end", 3.0),
                   allow_outside_claim=s.bool("allow_outside_claim"))
        if out["dt"] > 1:
            raise ValidationError("dt", "dt·d/eps² ≤ 1")
        return out
    if rc.mode == "continuity":
        kernel = build_kernel(rc.sections)
        return dict(shape=build_initial(s, kernel.dim).shape, kernel=kernel, h=s.float("h"),
                    half_width=s.float("half_width"), c0=s.float("c0", 1.0), ell0=s.float("ell0", 1.0),
                    dt=s.opt_float("dt"), t_end=s.float("t_end", 60.0), tail_tol=s.float("tail_tol", 1e-10),
                    quiescence_rel=s.float("quiescence", 1e-6))
    if rc.mode == "converge":
        kernel = build_kernel(rc.sections) if "kernel" in rc.sections else None
        kind = s.str("kind", "onephase")
        return dict(kind=kind, eps_list=s.vec("eps", (0.4, 0.2, 0.1)), kernel=kernel,
                    h=s.float("h", 0.0125), half_width=s.float("half_width", 3.0), t_end=s.float("t_end", 0.5),
                    c0=s.float("c0", 2.0 if kind == "onephase" else 1.0), ell0=s.float("ell0", 1.0),
                    alpha0=s.opt_float("alpha0"), n_times=s.int("n_times", 10),
                    dt_max=s.float("dt_max", 0.005), reference_dt=s.float("reference_dt", 1e-4))
    if rc.mode == "kernel-check":
        out: dict[str, Any] = {"kernel": build_kernel(rc.sections)}
        if s.has("xi"):
            out["xi_sequence"] = s.vec("xi")
        out["tol"] = s.float("tol", 1e-8)
        return out
    raise ValidationError("run.mode", f"mode in {{{', '.join(MODES)}}}")


def _finish(sections: dict[str, dict[str, str]], mode_hint: str | None = None) -> RunConfig:
    run = _Section("run", sections.get("run", {}))
    mode = mode_hint or run.str("mode")
    if mode not in MODES:
        raise ValidationError("run.mode", f"mode in {{{', '.join(MODES)}}}")
    present = [m for m, sec in MODES.items() if sec in sections]
    if MODES[mode] not in sections or len(set(MODES[m] for m in present)) != 1:
        raise ValidationError("run.mode", f"exactly one mode section, [{MODES[mode]}]")
    every = run.int("snapshot_every", 10)
    if every < 1:
        raise ValidationError("run.snapshot_every", "snapshot_every ≥ 1")
    out_dir = run.str("output_dir", "out")
    # canonical [run] section first, so render/parse is a fixed point
    canon = {"run": {"mode": mode, "output_dir": out_dir, "snapshot_every": str(every)}}
    canon.update((k, dict(v)) for k, v in sections.items() if k != "run")
    rc = RunConfig(mode, out_dir, every, canon)
    rc.built = build_mode_config(rc)
    return rc


def parse_config(text: str, mode: str | None = None) -> RunConfig:
    """Parse and fully validate; ``mode`` overrides ``[run] mode``."""
    sections = _lex(text)
    if mode is not None:
        sections.setdefault("run", {})["mode"] = mode
    return _finish(sections)


def render_config(rc: RunConfig) -> str:
    """Canonical text: [run] first, then the other sections in stored order."""
    lines = []
    for name, kv in rc.sections.items():
        if lines:
            lines.append("")
        lines += [f"[{name}]"] + [f"{k} = {v}" for k, v in kv.items()]
    return "\n".join(lines) + "\n"


def apply_overrides(text: str, overrides: list[str], mode: str | None = None) -> RunConfig:
    """Parse ``text`` after applying ``section.key=value`` overrides."""
    sections = _lex(text)
    for item in overrides:
        lhs, sep, value = item.partition("=")
        name, dot, key = lhs.strip().rpartition(".")
        if not sep or not dot or not name or not key:
            raise ValidationError(item, "override of the form section.key=value")
        kind = _section_kind(name)
        if kind is None or key not in _KEYS[kind]:
            raise ValidationError(lhs.strip(), "known section and key")
        sections.setdefault(name, {})[key] = ", ".join(p.strip() for p in value.split(","))
    if mode is not None:
        sections.setdefault("run", {})["mode"] = mode
    return _finish(sections)
