"""Nonlocal-to-local sweep: L1 distance to the local reference for shrinking eps."""

import argparse
from pathlib import Path

from nlstefan.experiments import run_convergence_sweep
from nlstefan.io import emit_error_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1])
    ap.add_argument("--h", type=float, default=0.0125)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--out", type=Path, default=Path("out/convergence"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for kind in ("onephase", "twophase"):
        rep = run_convergence_sweep(kind, eps_list=args.eps, h=args.h, t_end=args.t_end)
        emit_error_table(rep.rows, args.out / f"{kind}_errors.csv")
        errs = "  ".join(f"eps={e:g}: {err:.4e}" for e, err in zip(rep.eps, rep.errors))
        print(f"{kind:9s} {errs}  decreasing={rep.strictly_decreasing}")


if __name__ == "__main__":
    main()
