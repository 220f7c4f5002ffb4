"""Summary figures: per-bird bars with SD whiskers and overall dashed lines.

Rendering is byte-deterministic: the Agg backend is forced, the SVG
hash salt is pinned, and the date metadata is stripped. Every bar
carries a ``bar-<category>-<bird>-<metric>`` gid and every overall line
an ``overall-<category>`` gid so output can be checked structurally.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import EmptyInput
from .stats import GroupSummary, overall_summary

PLOT_KINDS = {
    "velocity": (("takeoff_v", "flying_v", "landing_v"), "velocity (m/s)"),
    "acceleration": (("takeoff_a", "flying_a", "landing_a"), "acceleration (m/s^2)"),
    "speed": (("flying_speed", "landing_speed"), "speed (m/s)"),
}

_BIRD_COLORS = {"Nigel": "#2a7e43", "Hedwig": "#4878cf", "Ava": "#d8a200", "Joe": "#c34f4f"}
_SVG_HASHSALT = "perchflight"


def plot_summary(groups: list[GroupSummary], kind: str,
                 sd_convention: str = "sample", weighting: str = "by_clip") -> bytes:
    """Render one figure (one panel per category) as SVG bytes.

    ``groups`` are per-bird group summaries; the per-category overall
    line is computed here with the requested weighting. Only groups
    carrying at least one metric of the requested kind are drawn.

    Raises:
        EmptyInput: no group has data for this kind.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    metric_names, ylabel = PLOT_KINDS[kind]

    by_category: dict[str, list[GroupSummary]] = {}
    for g in groups:
        if g.bird != "ALL" and any(m in g.metrics for m in metric_names):
            by_category.setdefault(g.category, []).append(g)
    if not by_category:
        raise EmptyInput(f"no rows carry {kind} metrics")

    categories = sorted(by_category)
    plt.rcParams["svg.hashsalt"] = _SVG_HASHSALT
    fig, axes = plt.subplots(1, len(categories),
                             figsize=(4.2 * len(categories), 3.6), squeeze=False)
    short = {name: name.split("_")[0] for name in metric_names}
    for ax, category in zip(axes[0], categories):
        members = by_category[category]
        n_birds = len(members)
        width = 0.8 / n_birds
        for bi, g in enumerate(members):
            xs, ys, errs = [], [], []
            for mi, metric in enumerate(metric_names):
                ms = g.metrics.get(metric)
                if ms is None:
                    continue
                xs.append(mi + (bi - (n_birds - 1) / 2.0) * width)
                ys.append(ms.mean)
                chosen = ms.sd_sample if sd_convention == "sample" else ms.sd_population
                errs.append(chosen if chosen is not None else 0.0)
            bars = ax.bar(xs, ys, width=width * 0.92, yerr=errs, capsize=2,
                          color=_BIRD_COLORS.get(g.bird, "#888888"), label=g.bird,
                          error_kw={"elinewidth": 0.8})
            for bar, metric in zip(bars, [m for m in metric_names if m in g.metrics]):
                bar.set_gid(f"bar-{category}-{g.bird}-{metric}")
        overall = overall_summary(members, weighting=weighting)
        ox = [mi for mi, m in enumerate(metric_names) if m in overall.metrics]
        oy = [overall.metrics[metric_names[i]].mean for i in ox]
        if ox:
            (line,) = ax.plot(ox, oy, "k--", linewidth=1.2, label="overall")
            line.set_gid(f"overall-{category}")
        ax.set_title(category)
        ax.set_xticks(range(len(metric_names)))
        ax.set_xticklabels([short[m] for m in metric_names])
        ax.axhline(0.0, color="#bbbbbb", linewidth=0.6)
        ax.set_ylabel(ylabel)
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
