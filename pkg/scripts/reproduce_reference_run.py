"""Reproduce the Schwarzschild shooting run and write its certificate and figure data.

    python scripts/reproduce_reference_run.py [--out results/reference_run] [--oracle]
"""

import argparse
import time

from morawetz import cli
from morawetz.spectral import reference_problem, verify_condition11


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/reference_run")
    ap.add_argument("--oracle", action="store_true", help="also compute the n=200000 eigenvalue oracle")
    args = ap.parse_args()

    t0 = time.perf_counter()
    cert = verify_condition11(reference_problem(), margin=2.0, oracle=args.oracle)
    elapsed = time.perf_counter() - t0

    print(f"psi(-1000)      = {cert.psi_left:.6g}")
    print(f"psi'(-1000)     = {cert.dpsi_left:.6g}")
    print(f"left threshold  = {cert.threshold_left:.6g} (margin 2), {cert.threshold_left_margin1:.6g} (margin 1)")
    print(f"min psi         = {cert.min_psi:.6g}")
    if cert.oracle_min_eigenvalue is not None:
        print(f"oracle lambda_0 = {cert.oracle_min_eigenvalue:.6g}")
    print(f"verified        = {cert.verified}   ({elapsed:.2f} s)")

    flags = ["--out", args.out, "--quiet"] + (["--oracle"] if args.oracle else [])
    for cmd in ("verify-spectral", "emit-plots"):
        code = cli.main([cmd, *flags])
        print(f"morawetz {cmd} -> exit {code}")


if __name__ == "__main__":
    main()
