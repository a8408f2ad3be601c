"""Convergence rates in h on uniform square grids for Example 1."""
import argparse

import numpy as np

from ipvem.driver import AdaptiveConfig, run_uniform


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, choices=(2, 3), default=2)
    ap.add_argument("--ns", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--problem", default="ex1")
    ap.add_argument("--out")
    args = ap.parse_args()
    clog, slopes = run_uniform(AdaptiveConfig(problem=args.problem, k=args.k, out_dir=args.out), tuple(args.ns))
    h = clog.column("hmax")
    print(f"{'h':>9} {'N':>7} {'ErrH2':>11} {'eta':>11} {'eff':>6}")
    for r in clog.records:
        print(f"{r.hmax:9.4f} {r.ndofs:7d} {r.errh2:11.4e} {r.eta:11.4e} {r.effectivity:6.2f}")
    for name in ("errh2", "eta"):
        local = np.diff(np.log(clog.column(name))) / np.diff(np.log(h))
        print(f"{name}: fitted slope {slopes[name]:.3f}, local slopes {np.round(local, 3).tolist()}")


if __name__ == "__main__":
    main()
