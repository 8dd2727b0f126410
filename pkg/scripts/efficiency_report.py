#!/usr/bin/env python3
"""Summarize the data-efficiency comparison from finished training runs.

Prints the baseline's 100-episode moving-mean level at its final episode,
the enhanced runs' crossing episode, and the implied efficiency ratio.
Usage: python3 scripts/efficiency_report.py [runs_dir]
"""

import os
import sys

import numpy as np


def read_avg(path):
    eps, avg = [], []
    for line in open(path):
        if line.startswith("#") or line.startswith("episode"):
            continue
        p = line.strip().split(",")
        eps.append(int(p[0]))
        avg.append(float(p[4]))
    order = np.argsort(eps)
    return np.array(avg)[order]


def moving_mean(v, w=100):
    out = np.full(len(v), np.nan)
    c = np.cumsum(np.insert(v, 0, 0.0))
    for i in range(w - 1, len(v)):
        out[i] = (c[i + 1] - c[i + 1 - w]) / w
    return out


def main():
    runs = sys.argv[1] if len(sys.argv) > 1 else "runs"
    base = [read_avg(os.path.join(runs, f"wrist_baseline_s{s}", "rewards.csv"))
            for s in (101, 102)]
    bar = [read_avg(os.path.join(runs, f"wrist_sacbar_s{s}", "rewards.csv"))
           for s in (101, 102)]
    horizon = min(map(len, base))
    level = float(np.mean([moving_mean(b[:horizon])[horizon - 1] for b in base]))
    n = min(map(len, bar))
    curve = moving_mean(np.mean([b[:n] for b in bar], axis=0))
    crossed = np.nonzero(curve >= level)[0]
    first = int(crossed[0]) + 1 if crossed.size else None
    print(f"baseline level at episode {horizon}: {level:.4f} (100-episode moving mean, 2 seeds)")
    if first is None:
        print(f"enhanced runs never reach the baseline level within {n} episodes "
              f"(final moving mean {curve[~np.isnan(curve)][-1]:.4f})")
    else:
        print(f"enhanced runs reach it at episode {first} "
              f"-> {horizon / first:.2f}x data-efficiency gain")
    for name, c in (("baseline", [moving_mean(b) for b in base]),
                    ("enhanced", [moving_mean(b) for b in bar])):
        for i, mm in enumerate(c):
            marks = [200, 500, 1000, 1600, 2400, 3500]
            pts = ", ".join(f"{m}:{mm[m - 1]:.2f}" for m in marks if m <= len(mm))
            print(f"  {name} seed {101 + i}: {pts}")


if __name__ == "__main__":
    main()
