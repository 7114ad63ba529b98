//! Self-contained plot scripts emitted next to the experiment CSVs, so
//! the binary itself needs no graphics dependencies. Each script reads
//! its CSV from its own directory and writes a PNG beside it.

pub const LEARNING_CURVES_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Mean normalized learning curves per reward setup."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
curves = defaultdict(list)
with open(here / "learning_curves.csv", newline="") as f:
    for row in csv.DictReader(f):
        curves[row["setup"]].append((int(row["step"]), float(row["norm_return_mean"])))

fig, ax = plt.subplots(figsize=(7.0, 4.2))
for setup in sorted(curves):
    points = sorted(curves[setup])
    ax.plot([p[0] for p in points], [p[1] for p in points], label=setup)
ax.axhline(1.0, color="black", linestyle="--", linewidth=1.0, label="baseline controller")
ax.set_xlabel("environment steps")
ax.set_ylabel("mean return / baseline return")
ax.set_title("Learning curves by reward setup")
ax.legend()
fig.tight_layout()
out = here / "learning_curves.png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;

pub const DISTANCES_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Highest walking distance per reward setup versus the baseline."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
best = defaultdict(list)
baseline = None
with open(here / "distances.csv", newline="") as f:
    for row in csv.DictReader(f):
        if row["setup"] == "baseline":
            baseline = float(row["best_distance"])
        else:
            best[row["setup"]].append(float(row["best_distance"]))

setups = sorted(best)
fig, ax = plt.subplots(figsize=(6.4, 4.2))
ax.bar(range(len(setups)), [max(best[s]) for s in setups], color="tab:blue")
for i, s in enumerate(setups):
    ax.scatter([i] * len(best[s]), best[s], color="black", s=12, zorder=3)
if baseline is not None:
    ax.axhline(baseline, color="black", linestyle="--", linewidth=1.0,
               label="baseline controller")
    ax.legend()
ax.set_xticks(range(len(setups)))
ax.set_xticklabels(setups)
ax.set_ylabel("walking distance at 10 s (m)")
ax.set_title("Highest walking distances by reward setup")
fig.tight_layout()
out = here / "walking_distances.png"
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;
