"""Best smooth-Hardy constant as the truncation domain [-R, R] grows.

With alpha = 0 the quotient's essential-spectrum bottom on the whole line is
1/4 (the Hardy constant for int u'^2 >= 1/4 int u^2/rho^2), and the truncated
constants approach their limit only logarithmically in R.  ``--heights`` repeats
the table for bumps chi of other heights; the slow approach persists for each.

    python scripts/hardy_truncation.py [--heights 0.1 0.5 1.0]
"""

import argparse

from morawetz.hardy import HardyConfig, best_constant
from morawetz.spectral import bump


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--cells-per-unit", type=float, default=50.0)
    ap.add_argument("--heights", type=float, nargs="+", default=[1.0])
    args = ap.parse_args()
    for height in args.heights:
        print(f"\nchi = bump on (-1, 1), height {height:g}")
        print(f"{'R':>6} {'n':>7} {'C(R)':>10} {'change vs R/2':>14}")
        prev = None
        for R in (50, 100, 200, 400, 800, 1600):
            n = int(2 * R * args.cells_per_unit)
            c = best_constant(HardyConfig(alpha=args.alpha, chi=bump(-1.0, 1.0, height), domain=(-R, R), n=n))
            change = f"{abs(c - prev) / prev:14.2%}" if prev else " " * 14
            print(f"{R:>6} {n:>7} {c:>10.5f} {change}")
            prev = c


if __name__ == "__main__":
    main()
