#!/usr/bin/env python3
"""Sweep the mode-wise growth estimate over the oscillation-scale catalog.

For each catalog profile, evolves a geometric frequency grid from near 0 to
T, records sup_t |V(t, lam)| against lam|u0| + |u1|, and fits the smallest
c1 with sup |V| <= C exp(c1 nu(t_sep)).  The fit is recomputed on a doubled
grid to show stability.
"""

import argparse
import math

from nuloss import coeffs as cf
from nuloss import energy as en
from nuloss import zones as zn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=16.0)
    ap.add_argument("--P", type=int, default=10)
    ap.add_argument("--lam-lo", type=int, default=10, help="log2 of grid start")
    ap.add_argument("--lam-hi", type=int, default=14, help="log2 of grid end")
    args = ap.parse_args()

    zp = zn.ZoneParams(M=args.M, P=args.P)
    for kind in ("constant", "log", "log_power", "iterated_log"):
        profile = cf.catalog_profile(kind)
        floor = zp.scale * float(profile.nu.value(profile.T)) / profile.T
        lams = [2.0**k for k in range(args.lam_lo, args.lam_hi + 1)
                if 2.0**k >= 1.1 * floor]
        rep = en.verify_with_refinement(profile, zp, lams)
        print(f"{kind:13s} fitted c1 = {rep.fitted_c1:+.4f}  "
              f"refined = {rep.refined_c1:+.4f}  stable = {rep.stable}")
        for row in rep.rows:
            print(f"   lam = 2^{math.log2(row.lam):4.1f}  sup|V|/data = "
                  f"{row.ratio:8.4f}  nu(t_sep) = {row.nu_at_sep:6.3f}  "
                  f"c1 row = {row.c1_row:+.4f}")


if __name__ == "__main__":
    main()
