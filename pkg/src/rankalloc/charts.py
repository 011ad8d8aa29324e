"""Static SVG renderings of the figure CSVs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import METRICS  # noqa: E402

# stable ids and no timestamp so reruns give identical files
plt.rcParams["svg.hashsalt"] = "rankalloc"
_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def render(runs, means, slope, out_dir, paired) -> list:
    out_dir = Path(out_dir)
    scenarios = list(dict.fromkeys(r.scenario for r in runs))
    bidders = list(dict.fromkeys(r.bidder for r in runs))

    fig, axes = plt.subplots(len(scenarios), len(METRICS), figsize=(3.2 * len(METRICS), 2.8 * len(scenarios)),
                             squeeze=False)
    for i, s in enumerate(scenarios):
        for j, k in enumerate(METRICS):
            data = [[getattr(r, k) for r in runs if r.scenario == s and r.bidder == b] for b in bidders]
            ax = axes[i][j]
            keep = [(b, d) for b, d in zip(bidders, data) if len(d) > 1]
            if keep:
                ax.violinplot([d for _, d in keep], showmedians=True)
                ax.set_xticks(range(1, len(keep) + 1), [b for b, _ in keep], rotation=45, fontsize=7)
            ax.set_title(f"{s}: {k}", fontsize=8)
    _save(fig, out_dir / "distribution.svg")

    fig, axes = plt.subplots(len(scenarios), len(METRICS), figsize=(2.6 * len(METRICS), 2.8 * len(scenarios)),
                             squeeze=False)
    for i, s in enumerate(scenarios):
        for j, k in enumerate(METRICS):
            ax = axes[i][j]
            for row in slope:
                if row[0] == s and row[1] == k:
                    ax.plot([0, 1], [float(row[4]), float(row[6])], color="0.4", lw=0.7)
            ax.set_xticks([0, 1], list(paired), fontsize=7)
            ax.set_title(f"{s}: {k}", fontsize=8)
    _save(fig, out_dir / "slope.svg")

    fig, ax = plt.subplots(figsize=(5, 4))
    for (s, b), (e, d) in means.items():
        ax.scatter(e, d, s=12)
        ax.annotate(f"{s}/{b}", (e, d), fontsize=6)
        if b == paired[0] and (s, paired[1]) in means:
            e2, d2 = means[s, paired[1]]
            ax.annotate("", (e2, d2), (e, d), arrowprops={"arrowstyle": "->"})
    ax.set_xlabel("mean energy")
    ax.set_ylabel("mean delay")
    _save(fig, out_dir / "tradeoff.svg")
    return ["distribution.svg", "slope.svg", "tradeoff.svg"]
