"""Per-clip summaries grouped into per-bird/per-category statistics.

Means are arithmetic. Both standard-deviation conventions are always
computed (sample, n-1, and population, n) because published tables in
this domain rarely say which one they used; callers pick one when
emitting. Null metrics are excluded per metric, never by dropping whole
rows, so speed-only rows coexist with velocity/acceleration rows.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from statistics import fmean

from .errors import EmptyInput, InsufficientData, LayoutMismatch

METRICS = ("takeoff_v", "takeoff_a", "flying_v", "flying_a",
           "landing_v", "landing_a", "flying_speed", "landing_speed")

_BIRD_ORDER = {name: i for i, name in enumerate(("Nigel", "Hedwig", "Ava", "Joe", "ALL"))}
_CATEGORY_ORDER = {name: i for i, name in enumerate(("C1", "C2_SDF", "C2_ODF", "C2_S", "C3", "RANDOM"))}


def clip_sort_key(clip_id: str) -> tuple:
    """Numeric clip ids sort numerically, everything else lexically after."""
    try:
        return (0, int(clip_id), clip_id)
    except ValueError:
        return (1, 0, clip_id)


@dataclass(frozen=True)
class ClipSummary:
    clip_id: str
    bird: str
    category: str
    direction_code: str | None = None
    takeoff_v: float | None = None
    takeoff_a: float | None = None
    flying_v: float | None = None
    flying_a: float | None = None
    landing_v: float | None = None
    landing_a: float | None = None
    flying_speed: float | None = None
    landing_speed: float | None = None

    def __post_init__(self) -> None:
        if all(getattr(self, m) is None for m in METRICS):
            raise ValueError(f"clip {self.clip_id}: every metric is null")


@dataclass(frozen=True)
class MetricStats:
    mean: float
    sd_sample: float | None
    sd_population: float | None
    n: int


@dataclass(frozen=True)
class GroupSummary:
    """Statistics for one (bird, category) cell; bird may be "ALL"."""

    bird: str
    category: str
    metrics: dict[str, MetricStats]
    weighting: str | None = None

    def n_clips(self) -> int:
        return max((m.n for m in self.metrics.values()), default=0)


def sd(values, convention: str = "sample") -> float:
    """Standard deviation under the chosen convention.

    Raises:
        InsufficientData: fewer values than the convention allows.
    """
    vals = [float(v) for v in values]
    if convention == "sample":
        if len(vals) < 2:
            raise InsufficientData("sample SD needs at least two values")
        denom = len(vals) - 1
    elif convention == "population":
        if len(vals) < 1:
            raise InsufficientData("population SD needs at least one value")
        denom = len(vals)
    else:
        raise ValueError(f"unknown SD convention {convention!r}")
    mu = fmean(vals)
    return math.sqrt(sum((v - mu) ** 2 for v in vals) / denom)


def _metric_stats(values: list[float]) -> MetricStats:
    n = len(values)
    return MetricStats(
        mean=fmean(values),
        sd_sample=sd(values, "sample") if n >= 2 else None,
        sd_population=sd(values, "population") if n >= 2 else None,
        n=n)


def group_summaries(rows: list[ClipSummary]) -> list[GroupSummary]:
    """One GroupSummary per (bird, category), in canonical table order.

    Per metric, only non-null values count toward mean/SD/n. Input row
    order never matters.
    """
    if not rows:
        raise EmptyInput("no clip summaries to group")
    groups: dict[tuple[str, str], list[ClipSummary]] = {}
    for row in rows:
        groups.setdefault((row.category, row.bird), []).append(row)
    out = []
    for (category, bird) in sorted(groups,
                                   key=lambda k: (_CATEGORY_ORDER.get(k[0], 99),
                                                  _BIRD_ORDER.get(k[1], 99))):
        members = groups[(category, bird)]
        metrics = {}
        for name in METRICS:
            # sorted so the float summation order, and hence the exact
            # result, is independent of input row order
            values = sorted(float(getattr(r, name)) for r in members if getattr(r, name) is not None)
            if values:
                metrics[name] = _metric_stats(values)
        out.append(GroupSummary(bird=bird, category=category, metrics=metrics))
    return out


def overall_summary(groups: list[GroupSummary], weighting: str = "by_clip") -> GroupSummary:
    """Collapse one category's per-bird groups into an "ALL" row.

    ``by_clip`` pools every underlying clip value (reconstructed exactly
    from each group's mean/SD/n); ``by_bird`` averages the bird means
    with equal weight and takes the SD across those means.

    Raises:
        EmptyInput: no groups.
    """
    if not groups:
        raise EmptyInput("no groups to summarize")
    categories = {g.category for g in groups}
    if len(categories) != 1:
        raise ValueError(f"groups span multiple categories: {sorted(categories)}")
    if weighting not in ("by_clip", "by_bird"):
        raise ValueError(f"unknown weighting {weighting!r}")
    category = categories.pop()

    metrics: dict[str, MetricStats] = {}
    names = sorted({name for g in groups for name in g.metrics},
                   key=METRICS.index)
    for name in names:
        cells = [g.metrics[name] for g in groups if name in g.metrics]
        if weighting == "by_bird":
            means = [c.mean for c in cells]
            metrics[name] = _metric_stats(means)
        else:
            n_tot = sum(c.n for c in cells)
            mean = sum(c.mean * c.n for c in cells) / n_tot
            # sum of squared deviations about the pooled mean, from each
            # cell's population SD: ss_i = n_i sd_i^2 + n_i (mean_i - mean)^2
            ss = sum(c.n * ((c.sd_population or 0.0) ** 2 + (c.mean - mean) ** 2) for c in cells)
            metrics[name] = MetricStats(
                mean=mean,
                sd_sample=math.sqrt(ss / (n_tot - 1)) if n_tot >= 2 else None,
                sd_population=math.sqrt(ss / n_tot) if n_tot >= 2 else None,
                n=n_tot)
    return GroupSummary(bird="ALL", category=category, metrics=metrics, weighting=weighting)


# --- table emission ---

TABLE6_COLUMNS = ("category", "bird",
                  "takeoff_v_mean", "takeoff_v_sd", "takeoff_a_mean", "takeoff_a_sd",
                  "flying_v_mean", "flying_v_sd", "flying_a_mean", "flying_a_sd",
                  "landing_v_mean", "landing_v_sd", "landing_a_mean", "landing_a_sd",
                  "n_clips", "sd_convention", "weighting")
APPENDIX_COLUMNS = ("category", "bird", "clip_id",
                    "takeoff_v", "flying_v", "landing_v",
                    "takeoff_a", "flying_a", "landing_a")
CATEGORY3_COLUMNS = ("clip_id", "flying_speed", "landing_speed")


def _num(x: float | None) -> str:
    return "" if x is None else f"{x:.9f}"


def emit_table(rows, layout: str, sd_convention: str = "sample") -> bytes:
    """Fixed-layout CSV with 9 decimal places and deterministic order.

    ``table6`` takes GroupSummary rows; ``appendix`` and ``category3``
    take ClipSummary rows (``category3`` insists on speed-only rows).

    Raises:
        LayoutMismatch: rows do not fit the layout.
    """
    rows = list(rows)
    out = io.StringIO()
    if layout == "table6":
        if any(not isinstance(r, GroupSummary) for r in rows):
            raise LayoutMismatch("table6 layout takes group summaries")
        if sd_convention not in ("sample", "population"):
            raise ValueError(f"unknown SD convention {sd_convention!r}")
        out.write(",".join(TABLE6_COLUMNS) + "\n")
        rows.sort(key=lambda g: (_CATEGORY_ORDER.get(g.category, 99), _BIRD_ORDER.get(g.bird, 99)))
        for g in rows:
            cells = [g.category, g.bird]
            for metric in ("takeoff_v", "takeoff_a", "flying_v", "flying_a", "landing_v", "landing_a"):
                ms = g.metrics.get(metric)
                if ms is None:
                    cells += ["", ""]
                else:
                    chosen = ms.sd_sample if sd_convention == "sample" else ms.sd_population
                    cells += [_num(ms.mean), _num(chosen)]
            cells += [str(g.n_clips()), sd_convention, g.weighting or ""]
            out.write(",".join(cells) + "\n")
    elif layout == "appendix":
        if any(not isinstance(r, ClipSummary) for r in rows):
            raise LayoutMismatch("appendix layout takes clip summaries")
        out.write(",".join(APPENDIX_COLUMNS) + "\n")
        rows.sort(key=lambda r: (_CATEGORY_ORDER.get(r.category, 99),
                                 _BIRD_ORDER.get(r.bird, 99), clip_sort_key(r.clip_id)))
        for r in rows:
            out.write(",".join([r.category, r.bird, r.clip_id,
                                _num(r.takeoff_v), _num(r.flying_v), _num(r.landing_v),
                                _num(r.takeoff_a), _num(r.flying_a), _num(r.landing_a)]) + "\n")
    elif layout == "category3":
        if any(not isinstance(r, ClipSummary) for r in rows):
            raise LayoutMismatch("category3 layout takes clip summaries")
        if any(r.flying_speed is None and r.landing_speed is None for r in rows):
            raise LayoutMismatch("category3 layout takes speed rows")
        out.write(",".join(CATEGORY3_COLUMNS) + "\n")
        rows.sort(key=lambda r: clip_sort_key(r.clip_id))
        for r in rows:
            out.write(",".join([r.clip_id, _num(r.flying_speed), _num(r.landing_speed)]) + "\n")
    else:
        raise LayoutMismatch(f"unknown layout {layout!r}")
    return out.getvalue().encode("utf-8")


# --- clip-summary interchange CSV (full precision) ---

SUMMARY_COLUMNS = ("clip_id", "bird", "category", "direction_code") + METRICS


def summaries_to_csv(rows: list[ClipSummary]) -> bytes:
    """Full-precision interchange CSV, one row per clip."""
    out = io.StringIO()
    out.write(",".join(SUMMARY_COLUMNS) + "\n")
    for r in sorted(rows, key=lambda r: (_CATEGORY_ORDER.get(r.category, 99),
                                         _BIRD_ORDER.get(r.bird, 99), clip_sort_key(r.clip_id))):
        cells = [r.clip_id, r.bird, r.category, r.direction_code or ""]
        cells += ["" if getattr(r, m) is None else repr(float(getattr(r, m))) for m in METRICS]
        out.write(",".join(cells) + "\n")
    return out.getvalue().encode("utf-8")


def summaries_from_csv(source) -> list[ClipSummary]:
    """Inverse of :func:`summaries_to_csv`."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    col = {name: i for i, name in enumerate(header)}
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        kwargs = {
            "clip_id": parts[col["clip_id"]],
            "bird": parts[col["bird"]],
            "category": parts[col["category"]],
            "direction_code": parts[col["direction_code"]] or None,
        }
        for m in METRICS:
            raw = parts[col[m]] if m in col else ""
            kwargs[m] = float(raw) if raw else None
        rows.append(ClipSummary(**kwargs))
    return rows
