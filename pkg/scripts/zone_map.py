#!/usr/bin/env python3
"""Dump the phase-space zone decomposition as plot-ready CSV.

Writes (t, lambda, zone) triples; the pd/pe boundary is the separating
curve t lam = 2^P nu(t).
"""

import argparse
import sys

import numpy as np

from nuloss import coeffs as cf
from nuloss import zones as zn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=16.0)
    ap.add_argument("--P", type=int, default=10)
    ap.add_argument("--nt", type=int, default=60)
    ap.add_argument("--nlam", type=int, default=40)
    ap.add_argument("--out", default="zone_map.csv")
    args = ap.parse_args()

    profile = cf.catalog_profile("log")
    zp = zn.ZoneParams(M=args.M, P=args.P)
    t_grid = profile.T * 2.0 ** (-np.arange(args.nt) / 4.0)
    lam_grid = np.geomspace(1.0, 2.0**16, args.nlam)
    triples = zn.zone_map(profile, zp, np.sort(t_grid), lam_grid)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("t,lambda,zone\n")
        for t, lam, kind in triples:
            f.write(f"{t:.12g},{lam:.12g},{kind}\n")
    counts = {}
    for _, _, kind in triples:
        counts[kind] = counts.get(kind, 0) + 1
    print(f"wrote {args.out}: {counts}", file=sys.stderr)


if __name__ == "__main__":
    main()
