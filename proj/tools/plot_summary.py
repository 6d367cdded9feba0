#!/usr/bin/env python3
"""Render gap-vs-iteration and gap-vs-bits figures from a summary.csv.

Optional convenience only; the CSVs are the primary output. Requires
matplotlib.

Usage: plot_summary.py out/w1/summary.csv [figure.png]
"""
import csv
import sys
from collections import defaultdict


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    summary_path = sys.argv[1]
    out_path = sys.argv[2] if len(sys.argv) > 2 else summary_path.replace(".csv", ".png")

    series = defaultdict(lambda: {"it": [], "gap": [], "std": [], "bits": []})
    with open(summary_path, newline="") as f:
        for row in csv.DictReader(f):
            s = series[row["config"]]
            s["it"].append(int(row["iteration"]))
            s["gap"].append(float(row["gap_mean"]))
            s["std"].append(float(row["gap_std"]))
            s["bits"].append(float(row["cum_bits_mean"]))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_iter, ax_bits) = plt.subplots(1, 2, figsize=(11, 4))
    for label, s in series.items():
        ax_iter.plot(s["it"], s["gap"], label=label)
        lo = [max(g - d, 1e-300) for g, d in zip(s["gap"], s["std"])]
        hi = [g + d for g, d in zip(s["gap"], s["std"])]
        ax_iter.fill_between(s["it"], lo, hi, alpha=0.2)
        ax_bits.plot(s["bits"], s["gap"], label=label)
    for ax, xlabel in ((ax_iter, "iteration"), (ax_bits, "cumulative bits")):
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("optimality gap")
        ax.legend(fontsize=8)
    ax_bits.set_xscale("log")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
