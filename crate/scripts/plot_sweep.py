#!/usr/bin/env python3
"""Plot a sweep CSV: normalized lock-in frequency against K0/tau1, one curve per tau2."""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    curves = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["error"] or not row["omega_l_tau1_over_k0"]:
                continue
            key = (float(row["tau2"]), row["method"])
            curves[key]["x"].append(float(row["k0_over_tau1"]))
            curves[key]["y"].append(float(row["omega_l_tau1_over_k0"]))
    return curves


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="sweep.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (tau2, method), c in sorted(load(args.csv).items()):
        style = "-" if method == "analytic" else "o"
        pts = sorted(zip(c["x"], c["y"]))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], style, ms=3, label=f"tau2={tau2:g} {method}")
    ax.set_xscale("log")
    ax.set_xlabel("K0 / tau1")
    ax.set_ylabel("omega_l tau1 / K0")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
