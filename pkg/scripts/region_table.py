#!/usr/bin/env python3
"""Tabulate the exact and rounded gamma windows of the key-rate regions."""

import argparse

import numpy as np

from seqdiqkd.attacks import appendix_a_regions, optimal_chsh


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=19)
    args = ap.parse_args()

    exact, rounded = appendix_a_regions(), appendix_a_regions(rounded=True)
    print(f"{'q':>7s} {'region':>8s} {'g_lo':>9s} {'g_hi':>9s} {'g_lo~':>9s} {'g_hi~':>9s} {'S(g_lo)':>9s} {'S(g_hi)':>9s}")
    for q in np.linspace(0.5, 0.69, args.steps):
        for r_exact, r_round in zip(exact, rounded):
            iv, ivr = r_exact.interval(q), r_round.interval(q)
            if iv.empty:
                continue
            tag = r_exact.region_tag.rsplit("-", 1)[-1]
            print(
                f"{q:7.4f} {tag:>8s} {iv.lower:9.6f} {iv.upper:9.6f} {ivr.lower:9.6f} {ivr.upper:9.6f} "
                f"{optimal_chsh(q, iv.lower):9.6f} {optimal_chsh(q, iv.upper):9.6f}"
            )


if __name__ == "__main__":
    main()
