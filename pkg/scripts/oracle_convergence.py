"""Convergence of the discretised lowest eigenvalue of A in the grid size n.

The LAPACK bisection route is run at n in {25k, 50k, 100k, 200k}; the pure-Python
Sturm count is run at a smaller n as an independent check of the solver.
"""

import argparse
import time

from morawetz.spectral import discretized_min_eigenvalue, reference_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sturm-n", type=int, default=20_000)
    args = ap.parse_args()
    prob = reference_problem()
    print(f"{'n':>8} {'lambda_0':>14} {'seconds':>8}")
    for n in (25_000, 50_000, 100_000, 200_000):
        t0 = time.perf_counter()
        lam = discretized_min_eigenvalue(prob, n=n)
        print(f"{n:>8} {lam:>14.6e} {time.perf_counter() - t0:>8.2f}")
    t0 = time.perf_counter()
    a = discretized_min_eigenvalue(prob, n=args.sturm_n, method="lapack")
    b = discretized_min_eigenvalue(prob, n=args.sturm_n, method="sturm")
    print(f"n={args.sturm_n}: lapack {a:.6e}, own Sturm bisection {b:.6e} ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
