"""Run both nucleation examples and print the observed and predicted jump times."""

import argparse
import math

from nlstefan.experiments import run_example1, run_example2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h1", type=float, default=1 / 256, help="grid step for the interval example")
    ap.add_argument("--h2", type=float, default=1 / 64, help="grid step for the shell example")
    ap.add_argument("--skip-2d", action="store_true")
    args = ap.parse_args()

    rep = run_example1(h=args.h1)
    ends = sorted((float(c.min()), float(c.max())) for c in rep.nucleation_set)
    print(f"interval + annulus: t = {rep.jump_time:.5f} (predicted {rep.predicted_time:.5f}, ln 2 = {math.log(2):.5f})")
    print(f"  nucleated intervals: {', '.join(f'[{a:.4f}, {b:.4f}]' for a, b in ends)}")
    print(f"  components {rep.components_before} -> {rep.components_after}")
    if args.skip_2d:
        return
    rep = run_example2(h=args.h2)
    print(f"shell + ball: t = {rep.jump_time:.5f} (upper bound {rep.predicted_time:.5f})")
    print(f"  farthest nucleated cell from the origin: {rep.discrepancy['max_radius']:.5f}")
    print(f"  checks: {rep.checks}")


if __name__ == "__main__":
    main()
