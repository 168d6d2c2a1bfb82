"""Optional figures rendered from a run CSV (matplotlib, Agg backend)."""
from __future__ import annotations

import csv
import os
from collections import defaultdict

import numpy as np


def _load(path: str):
    runs = defaultdict(list)
    with open(path, encoding="utf-8", newline="") as f:
        rd = csv.DictReader(f)
        cols = rd.fieldnames or []
        for row in rd:
            runs[row["run_id"]].append(row)
    reward_cols = [c for c in cols if c.startswith("reward_")]
    return runs, reward_cols


def render_report(csv_path: str, out_dir: str) -> list[str]:
    """Regret curves (median and quartiles across seeds) and final
    per-player rewards. Returns the written file paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    runs, reward_cols = _load(csv_path)
    if not runs:
        raise ValueError(f"{csv_path} has no rows")
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    first = next(iter(runs.values()))
    ts = np.array([int(r["t"]) for r in first])
    reg = np.array([[float(r["cum_regret"]) for r in rows] for rows in runs.values()
                    if len(rows) == len(ts)])
    written = []

    fig, ax = plt.subplots(figsize=(6, 4))
    q1, med, q3 = np.percentile(reg, [25, 50, 75], axis=0)
    ax.plot(ts, med, label="median")
    ax.fill_between(ts, q1, q3, alpha=0.3, label="interquartile")
    ax.set_xscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    ax.set_title(f"{first[0]['algo']}  K={first[0]['K']}  M={first[0]['M']}")
    ax.legend()
    fig.tight_layout()
    p = os.path.join(out_dir, f"{stem}_regret.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fin = np.array([[float(rows[-1][c]) for c in reward_cols] for rows in runs.values()])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(reward_cols)), fin.mean(axis=0),
           yerr=fin.std(axis=0, ddof=1) if len(fin) > 1 else None, capsize=4)
    ax.set_xticks(range(len(reward_cols)))
    ax.set_xticklabels([c.split("_", 1)[1] for c in reward_cols])
    ax.set_xlabel("player")
    ax.set_ylabel("expected cumulative reward")
    fig.tight_layout()
    p = os.path.join(out_dir, f"{stem}_rewards.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written
