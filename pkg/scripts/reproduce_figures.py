#!/usr/bin/env python3
"""Regenerate every figure dataset and print a short bounding-box report."""

import argparse

import numpy as np

from seqdiqkd.figures import FIGURES, build_figure, write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figures")
    ap.add_argument("--resolution", type=int, default=200)
    ap.add_argument("--stamp", default=None, help="optional timestamp for the manifests")
    args = ap.parse_args()

    for fid in FIGURES:
        ds = build_figure(fid, args.resolution)
        write_dataset(ds, args.out, args.stamp)
        for name, s in ds.series.items():
            cols = s.columns
            box = ", ".join(
                f"{c} in [{np.nanmin(v):.6g}, {np.nanmax(v):.6g}]" for c, v in cols.items() if c in ("S", "Q_S", "qber", "r_C", "r_S", "r_CS")
            )
            print(f"{fid}/{name:14s} {s.kind:8s} n={len(next(iter(cols.values()))):4d}  {box}")


if __name__ == "__main__":
    main()
