"""Richardson study of the simulator: energy drift and identity residual under halving of (h, dt).

    python scripts/refinement_study.py [--presets free schwarzschild_l2] [--levels 3]
"""

import argparse
import time

from morawetz import simulate as sim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--presets", nargs="+", default=["free", "schwarzschild_l2"])
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    for name in args.presets:
        print(f"\n{name}")
        print(f"{'level':>5} {'h':>9} {'dt':>10} {'drift':>11} {'ratio':>6} {'residual':>11} {'ratio':>6} {'s':>6}")
        prev = None
        for level in range(args.levels):
            cfg = sim.preset(name, level)
            t0 = time.perf_counter()
            rep = sim.run(cfg, check_pairing_bound=False)
            dr, res = rep.energy_drift, rep.identity_residual
            r1 = f"{prev[0] / dr:6.2f}" if prev else "     -"
            r2 = f"{prev[1] / res:6.2f}" if prev else "     -"
            print(f"{level:>5} {cfg.h:>9.5f} {cfg.dt:>10.6f} {dr:>11.3e} {r1} {res:>11.3e} {r2} "
                  f"{time.perf_counter() - t0:>6.1f}")
            prev = (dr, res)


if __name__ == "__main__":
    main()
