"""Where Example 3's estimator sits as the regularization delta shrinks."""
import argparse

import numpy as np

from ipvem.driver import solve_and_estimate
from ipvem.mesh import generate_square_mesh
from ipvem.problems import get_problem
from ipvem.system import SchemeConfig

CORNER = np.array([0.5, 0.5])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-2, 1e-4, 1e-6])
    args = ap.parse_args()
    mesh = generate_square_mesh(args.n, "lshape")
    r = np.linalg.norm(mesh.centroids - CORNER, axis=1)
    for delta in args.deltas:
        step = solve_and_estimate(mesh, get_problem("ex3", delta=delta), SchemeConfig())
        w = step.estimate.eta_k**2
        w /= w.sum()
        print(f"delta {delta:8.1e}: eta {step.estimate.eta:.4e}, eta^2-weighted distance to corner {w @ r:.4f}, "
              f"share within 0.1 {w[r < 0.1].sum():.3f}")


if __name__ == "__main__":
    main()
