#!/usr/bin/env python3
"""Build the sharpness family and print its blow-up table.

Shows the weighted energies exp(-2 c1 nu(t_k)) E_1(T) growing without bound
along the member index while the data energies E_1(0) stay below 1.
"""

import argparse
import math

from nuloss import coeffs as cf
from nuloss import counterexample as cx


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--P", type=int, default=10)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--T", type=float, default=0.6)
    ap.add_argument("--k", type=int, default=8, help="number of members")
    ap.add_argument("--c1", type=float, default=1.0)
    args = ap.parse_args()

    family = cx.build_family(eps=args.eps, P=args.P, p=args.p,
                             nu=cf.nu_log(args.T), T=args.T, a0=1,
                             k_count=args.k, c1=args.c1)
    print(f"window coefficient range: [{family.a_min:.4f}, {family.a_max:.4f}]")
    table = cx.demonstrate_blowup(family)
    hdr = f"{'k':>2} {'lam_k':>10} {'t_k':>10} {'rho_k':>10} " \
          f"{'log E0':>9} {'log ET':>9} {'log weighted':>13}"
    print(hdr)
    for r in table.rows:
        print(f"{r.k:>2} {r.lam:>10} {r.t_k:>10.6f} {r.rho_k:>10.6f} "
              f"{r.E0_log:>9.2f} {r.ET_log:>9.2f} {r.weighted_log:>13.2f}")
    print(f"min slope of log weighted vs nu(t_k): {table.min_slope:.2f} "
          f"(>= 2 whenever 2^(p-1) eps pi > c1 + 1: "
          f"{2**(args.p - 1) * args.eps * math.pi:.2f} vs {args.c1 + 1:.2f})")


if __name__ == "__main__":
    main()
