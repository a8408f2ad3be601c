"""Compare the gradient- and Hessian-projector estimator variants on uniform grids."""
import argparse

from ipvem.driver import AdaptiveConfig, run_uniform


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ns", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--problem", default="ex1")
    args = ap.parse_args()
    runs = {}
    for variant, hess_eta1 in (("grad", False), ("hess", False), ("hess", True)):
        cfg = AdaptiveConfig(problem=args.problem, estimator=variant, hess_eta1=hess_eta1)
        runs[(variant, hess_eta1)] = run_uniform(cfg, tuple(args.ns))
    base, base_slopes = runs[("grad", False)]
    for key, (clog, slopes) in runs.items():
        ratio = base.column("eta") / clog.column("eta")
        print(f"{key[0]:>4} hess_eta1={key[1]!s:5}: eta slope {slopes['eta']:.3f}, "
              f"ErrH2 slope {slopes['errh2']:.3f}, grad/variant eta ratios {ratio.round(3).tolist()}")


if __name__ == "__main__":
    main()
