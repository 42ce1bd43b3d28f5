"""Command-line entry point: ``nlstefan <mode> --config run.cfg --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped,
4 a checked property failed under ``--assert``.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .config import MODES, RunConfig, apply_overrides, render_config
from .errors import (
    ConfigError,
    DegenerateBox,
    FormatError,
    InconsistentKernel,
    NonIntegrableMoment,
    NumericalGuard,
    QuadratureNonConvergence,
)
from .experiments import run_boundedness, run_continuity, run_convergence_sweep, run_example1, run_example2
from .io import emit_error_table, emit_front_csv, fmt, write_snapshot
from .kernels import check_prop12
from .local import solve_enthalpy_local, solve_obstacle_vi
from .onephase import OnePhaseProblem
from .twophase import TwoPhaseProblem, enthalpy_transform, local_coefficients, two_phase_bounds_check

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_ASSERT = 0, 2, 3, 4


def _report(out: Path, items: dict) -> None:
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k, v in items.items():
            w.writerow([k, fmt(v) if isinstance(v, float) else v])


def _snapshots(out: Path, snaps, prefix="gamma"):
    for i, (t, f) in enumerate(snaps):
        write_snapshot(f, out / f"{prefix}_{i:05d}.nsf", t)


def _simulate_1p(rc: RunConfig, out: Path) -> dict[str, bool]:
    cfg = rc.built
    prob = OnePhaseProblem(cfg)
    q = rc.mode_section.get("quiescence")
    res = prob.run(quiescence=float(q) if q else None)
    _snapshots(out, res.snapshots)
    write_snapshot(res.first_touch, out / "first_touch.nsf", res.state.t)
    emit_front_csv(res.trace, out / "front.csv")
    g0 = res.snapshots[0][1].values
    lo, hi = min(g0.min(), -cfg.ell0), max(g0.max(), -cfg.ell0)
    region = cfg.initial.region(prob.grid)
    s = res.first_touch.values[~region]
    wait = cfg.ell0 * cfg.eps**2 / (cfg.d * float(g0[region].max()))
    checks = {
        "max_principle": lo - 1e-12 <= res.gamma_min and res.gamma_max <= hi + 1e-12,
        "monotone_expansion": res.trace.monotone,
        "strong_positivity": res.strongly_positive,
        "waiting_time": bool(np.all(np.isnan(s) | (s >= wait - cfg.dt))),
    }
    _report(out, {"t_final": res.state.t, "stopped": res.stopped, "gamma_min": res.gamma_min,
                  "gamma_max": res.gamma_max, **checks})
    return checks


def _simulate_2p(rc: RunConfig, out: Path) -> dict[str, bool]:
    cfg = rc.built
    prob = TwoPhaseProblem(cfg)
    res = prob.run()
    _snapshots(out, res.snapshots)
    A, B = local_coefficients(cfg)
    _snapshots(out, [(t, enthalpy_transform(f, A, B, cfg.ell0)) for t, f in res.snapshots], "u")
    emit_front_csv(res.trace, out / "front.csv")
    emit_front_csv(res.extra_traces["solid"], out / "front_solid.csv")
    g0 = res.snapshots[0][1].values
    lo, hi = min(g0.min(), -cfg.alpha0), max(g0.max(), -cfg.alpha0)
    bounds = two_phase_bounds_check(res.snapshots, cfg)
    checks = {
        "max_principle": lo - 1e-12 <= res.gamma_min and res.gamma_max <= hi + 1e-12,
        "l1_bounds": bounds.max_ratio <= 1.0,
        "translation": bounds.translation_ok,
    }
    _report(out, {"t_final": res.state.t, "max_bound_ratio": bounds.max_ratio,
                  "liquid_monotone": res.trace.monotone, **checks})
    return checks


def _local_ref(rc: RunConfig, out: Path) -> dict[str, bool]:
    cfg = rc.built["config"]
    if rc.built["problem"] == "obstacle":
        res = solve_obstacle_vi(cfg)
        _snapshots(out, res.snapshots, "v")
        checks = {
            "nonnegative": all(np.all(f.values >= 0) for _, f in res.snapshots),
            "complementarity": max(res.residuals, default=0.0) <= cfg.vi_tolerance,
        }
        _report(out, {"max_sweeps": max(res.sweeps, default=0), **checks})
    else:
        res = solve_enthalpy_local(cfg)
        _snapshots(out, res.snapshots)
        _snapshots(out, res.u_snapshots, "u")
        checks = {}
        _report(out, {"t_final": res.snapshots[-1][0]})
    return checks


def _jump(rep, out: Path, extra: dict[str, bool]) -> dict[str, bool]:
    res = rep.result
    emit_front_csv(res.trace, out / "front.csv")
    write_snapshot(res.state.gamma, out / "nucleation.nsf", res.state.t)
    write_snapshot(res.first_touch, out / "first_touch.nsf", res.state.t)
    items = {"jump_detected": rep.jump_detected, "jump_time": rep.jump_time, "step_time": rep.step_time,
             "predicted_time": rep.predicted_time, "components_before": rep.components_before,
             "components_after": rep.components_after}
    items.update({f"discrepancy_{k}": float(v) for k, v in rep.discrepancy.items()})
    for i, cells in enumerate(rep.nucleation_set):
        items[f"nucleation_{i}_min"] = float(cells.min())
        items[f"nucleation_{i}_max"] = float(cells.max())
    items.update(extra)
    _report(out, items)
    return extra


def _example1(rc: RunConfig, out: Path) -> dict[str, bool]:
    kw = rc.built
    rep = run_example1(**kw)
    h = kw["h"]
    checks = {}
    if math.isfinite(rep.predicted_time):
        checks["time_within_tol"] = rep.jump_detected and abs(rep.jump_time - rep.predicted_time) <= 0.02
        checks["set_within_tol"] = rep.jump_detected and rep.discrepancy.get("set", math.inf) <= 2 * h
        checks["components_1_to_3"] = rep.components_before == 1 and rep.components_after == 3
    else:
        checks["no_touch"] = not rep.jump_detected
    return _jump(rep, out, checks)


def _example2(rc: RunConfig, out: Path) -> dict[str, bool]:
    rep = run_example2(**rc.built)
    checks = dict(rep.checks) if math.isfinite(rep.predicted_time) else {}
    return _jump(rep, out, checks)


def _continuity(rc: RunConfig, out: Path) -> dict[str, bool]:
    rep = run_continuity(**rc.built)
    emit_front_csv(rep.result.trace, out / "front.csv")
    checks = {"single_component": rep.single_component, "adjacency": rep.adjacency_ok}
    _report(out, {"radially_decreasing_kernel": rep.kernel_radially_decreasing, "convex_region": rep.shape_convex,
                  "stopped": rep.stopped, "t_final": rep.t_final, **checks})
    # the property is only claimed for convex regions and radially decreasing kernels
    return checks if rep.kernel_radially_decreasing and rep.shape_convex else {}


def _boundedness(rc: RunConfig, out: Path) -> dict[str, bool]:
    q = rc.mode_section.get("quiescence")
    rep = run_boundedness(rc.built, float(q) if q else 1e-6)
    emit_front_csv(rep.result.trace, out / "front.csv")
    checks = {"measure_bound": rep.measure_ok, "positive_l1_nonincreasing": rep.positive_l1_nonincreasing}
    _report(out, {"max_radius": rep.max_radius, "total_measure": rep.total_measure,
                  "measure_bound": rep.measure_bound, "radius_stable": rep.radius_stable, "stopped": rep.stopped,
                  "t_final": rep.t_final, **checks})
    return checks


def _converge(rc: RunConfig, out: Path) -> dict[str, bool]:
    rep = run_convergence_sweep(**rc.built)
    emit_error_table(rep.rows, out / "errors.csv")
    items = {f"max_error_eps_{e:g}": float(x) for e, x in zip(rep.eps, rep.errors)}
    checks = {"strictly_decreasing": rep.strictly_decreasing}
    _report(out, {**items, **checks})
    return checks


def _kernel_check(rc: RunConfig, out: Path) -> dict[str, bool]:
    kw = dict(rc.built)
    kernel = kw.pop("kernel")
    rep = check_prop12(kernel, **kw)
    items = {"A": rep.A, "fourier_limit": rep.fourier_limit_estimate, "fourier_error": rep.fourier_limit_error,
             "abs2_moment": rep.abs2_moment, "abs3_moment": rep.abs3_moment,
             "moment_conditions": rep.moment_conditions, "fourier_condition": rep.fourier_condition,
             "satisfied": rep.prop12_satisfied}
    items.update({f"first_moment_{j}": float(m) for j, m in enumerate(rep.first_moments)})
    _report(out, items)
    return {"satisfied": rep.prop12_satisfied}


HANDLERS = {
    "simulate-1p": _simulate_1p,
    "simulate-2p": _simulate_2p,
    "local-ref": _local_ref,
    "jump-example1": _example1,
    "jump-example2": _example2,
    "continuity": _continuity,
    "boundedness": _boundedness,
    "converge": _converge,
    "kernel-check": _kernel_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlstefan", description="Nonlocal Stefan problem experiments")
    p.add_argument("mode", choices=sorted(MODES))
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", default=None, help="output directory (overrides [run] output_dir)")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="replace one configuration value; repeatable")
    p.add_argument("--assert", dest="check", action="store_true",
                   help="exit with status 4 when a checked property fails")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
        rc = apply_overrides(text, args.override, mode=args.mode)
        out = Path(args.out or rc.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.cfg").write_text(render_config(rc))
        checks = HANDLERS[rc.mode](rc, out)
    except (ConfigError, DegenerateBox, FormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalGuard, NonIntegrableMoment, QuadratureNonConvergence) as exc:
        print(f"numerical guard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InconsistentKernel as exc:
        print(f"inconsistent kernel: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    failed = [k for k, ok in checks.items() if not ok]
    for k, ok in checks.items():
        print(f"{k}: {'ok' if ok else 'FAILED'}")
    if args.check and failed:
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
