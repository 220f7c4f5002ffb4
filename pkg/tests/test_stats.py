"""Grouping, standard deviations, overall summaries, and table layouts."""

from __future__ import annotations

import math

import numpy as np
import pytest

from perchflight import ClipSummary, emit_table, group_summaries, overall_summary, sd
from perchflight.errors import EmptyInput, InsufficientData, LayoutMismatch
from perchflight.stats import summaries_from_csv, summaries_to_csv

from conftest import load_reference_clip_rows


def row(clip_id="1", bird="Joe", category="C1", **metrics):
    return ClipSummary(clip_id=clip_id, bird=bird, category=category, **metrics)


def speed_row(clip_id, flying, landing, bird="Joe"):
    return ClipSummary(clip_id=clip_id, bird=bird, category="C3",
                       flying_speed=flying, landing_speed=landing)


# --- sd ---

def test_sd_population_two_point_closed_form():
    values = (0.505576718, 0.245267906)
    assert sd(values, "population") == pytest.approx(abs(values[0] - values[1]) / 2, abs=1e-12)
    assert sd(values, "population") == pytest.approx(0.130154406, abs=1e-9)


def test_sd_constant_values():
    assert sd([1.3, 1.3, 1.3], "sample") == 0.0
    assert sd([1.3, 1.3, 1.3], "population") == 0.0


def test_sd_sample_simple():
    assert sd([0.0, 2.0], "sample") == pytest.approx(math.sqrt(2.0))


def test_sd_insufficient():
    with pytest.raises(InsufficientData):
        sd([1.0], "sample")
    with pytest.raises(InsufficientData):
        sd([], "population")


def test_sd_population_never_exceeds_sample():
    rng = np.random.default_rng(51)
    for _ in range(50):
        values = rng.normal(0, 1, rng.integers(2, 9))
        assert sd(values, "population") <= sd(values, "sample")


# --- group_summaries ---

def test_group_means_match_published_joe_rows():
    rows = [row("3", takeoff_v=0.505576718, landing_v=0.337269593),
            row("4", takeoff_v=0.245267906, landing_v=0.283068514)]
    (group,) = group_summaries(rows)
    assert group.metrics["takeoff_v"].mean == pytest.approx(0.375422312, abs=5e-9)
    assert group.metrics["landing_v"].mean == pytest.approx(0.310169054, abs=5e-9)
    assert group.metrics["takeoff_v"].n == 2


def test_single_clip_group_has_null_sds():
    (group,) = group_summaries([row("3", takeoff_v=0.5)])
    stats = group.metrics["takeoff_v"]
    assert stats.mean == 0.5
    assert stats.sd_sample is None and stats.sd_population is None
    assert stats.n == 1


def test_grouping_is_permutation_invariant():
    rng = np.random.default_rng(52)
    rows = [row(str(i), bird=("Nigel", "Ava")[i % 2], takeoff_v=rng.uniform(0, 1),
                flying_v=rng.uniform(0, 2)) for i in range(10)]
    forward = group_summaries(rows)
    shuffled = list(rows)
    rng.shuffle(shuffled)
    assert group_summaries(shuffled) == forward


def test_null_metrics_excluded_per_metric():
    rows = [row("1", takeoff_v=0.4, flying_v=None),
            row("2", takeoff_v=0.6, flying_v=0.8)]
    (group,) = group_summaries(rows)
    assert group.metrics["takeoff_v"].n == 2
    assert group.metrics["flying_v"].n == 1
    assert "landing_v" not in group.metrics


def test_all_null_row_rejected():
    with pytest.raises(ValueError):
        row("1")
    with pytest.raises(EmptyInput):
        group_summaries([])


# --- overall_summary ---

def test_overall_by_bird_simple():
    groups = group_summaries([row(str(i), bird=b, takeoff_v=v) for i, (b, v) in
                              enumerate(zip(("Nigel", "Hedwig", "Ava", "Joe"), (1.0, 2.0, 3.0, 4.0)))])
    overall = overall_summary(groups, weighting="by_bird")
    assert overall.bird == "ALL"
    assert overall.metrics["takeoff_v"].mean == pytest.approx(2.5)
    assert overall.metrics["takeoff_v"].n == 4


def test_overall_by_clip_pools_values():
    groups = group_summaries([row("1", bird="Nigel", takeoff_v=1.0),
                              row("2", bird="Nigel", takeoff_v=3.0),
                              row("3", bird="Ava", takeoff_v=5.0)])
    overall = overall_summary(groups, weighting="by_clip")
    assert overall.metrics["takeoff_v"].mean == pytest.approx(3.0)
    assert overall.metrics["takeoff_v"].n == 3
    # pooled SDs equal the direct SDs over {1, 3, 5}
    assert overall.metrics["takeoff_v"].sd_population == pytest.approx(sd([1, 3, 5], "population"))
    assert overall.metrics["takeoff_v"].sd_sample == pytest.approx(sd([1, 3, 5], "sample"))


def test_overall_by_bird_over_published_takeoff_means():
    means = (0.528013827, 0.492189486, 0.577998329, 0.375422312)
    rows = []
    for bird, mean in zip(("Nigel", "Hedwig", "Ava", "Joe"), means):
        rows.append(row(bird[:2], bird=bird, takeoff_v=mean))
    overall = overall_summary(group_summaries(rows), weighting="by_bird")
    assert overall.metrics["takeoff_v"].mean == pytest.approx(0.4934059885, abs=1e-10)


def test_overall_rejects_empty_and_mixed():
    with pytest.raises(EmptyInput):
        overall_summary([])
    groups = group_summaries([row("1", category="C1", takeoff_v=1.0),
                              row("2", category="C3", flying_speed=1.0)])
    with pytest.raises(ValueError):
        overall_summary(groups)


# --- emit_table ---

def test_emit_appendix_layout_single_row():
    rows = [row("3", takeoff_v=0.505576718, flying_v=0.843853922, landing_v=0.337269593,
                takeoff_a=8.97803108, flying_a=-1.100235309, landing_a=-22.87045805)]
    lines = emit_table(rows, "appendix").decode().strip().split("\n")
    assert lines[0] == "category,bird,clip_id,takeoff_v,flying_v,landing_v,takeoff_a,flying_a,landing_a"
    assert lines[1] == ("C1,Joe,3,0.505576718,0.843853922,0.337269593,"
                        "8.978031080,-1.100235309,-22.870458050")


def test_emit_is_deterministic():
    rows = [row(str(i), takeoff_v=0.1 * i + 0.05) for i in range(1, 5)]
    assert emit_table(rows, "appendix") == emit_table(rows, "appendix")
    groups = group_summaries(rows)
    assert emit_table(groups, "table6") == emit_table(groups, "table6")


def test_emit_category3_layout():
    rows = [speed_row("211", 0.817096, 0.539124), speed_row("82", 0.614945, 0.221954)]
    lines = emit_table(rows, "category3").decode().strip().split("\n")
    assert lines[0] == "clip_id,flying_speed,landing_speed"
    # numeric clip order
    assert lines[1].startswith("82,") and lines[2].startswith("211,")


def test_emit_layout_mismatch():
    with pytest.raises(LayoutMismatch):
        emit_table([row("1", takeoff_v=0.1)], "category3")
    with pytest.raises(LayoutMismatch):
        emit_table([row("1", takeoff_v=0.1)], "table6")
    with pytest.raises(LayoutMismatch):
        emit_table([], "nope")


def test_emit_table6_row_order_and_sd_choice():
    rows = [row("1", bird="Joe", takeoff_v=0.4), row("2", bird="Joe", takeoff_v=0.8),
            row("3", bird="Nigel", takeoff_v=0.6), row("4", bird="Nigel", takeoff_v=0.2)]
    groups = group_summaries(rows)
    groups.append(overall_summary(groups, weighting="by_clip"))
    text = emit_table(groups, "table6", sd_convention="population").decode()
    lines = text.strip().split("\n")
    assert [ln.split(",")[1] for ln in lines[1:]] == ["Nigel", "Joe", "ALL"]
    assert lines[1].split(",")[3] == f"{sd([0.6, 0.2], 'population'):.9f}"
    assert all(ln.split(",")[-2] == "population" for ln in lines[1:])


# --- interchange csv ---

def test_summary_csv_roundtrip():
    rows = [row("3", takeoff_v=0.505576718, flying_a=-1.100235309),
            speed_row("211", 0.817096, 0.539124)]
    assert summaries_from_csv(summaries_to_csv(rows).decode()) == sorted(
        rows, key=lambda r: r.category)


# --- full published-table replication ---

def test_reference_rows_reproduce_every_published_group_mean():
    rows = []
    for r in load_reference_clip_rows():
        rows.append(ClipSummary(
            clip_id=r["clip_id"], bird=r["bird"], category=r["category"],
            takeoff_v=float(r["takeoff_v"]), flying_v=float(r["flying_v"]),
            landing_v=float(r["landing_v"]), takeoff_a=float(r["takeoff_a"]),
            flying_a=float(r["flying_a"]), landing_a=float(r["landing_a"])))
    groups = {(g.category, g.bird): g for g in group_summaries(rows)}
    assert len(groups) == 16
    joe = groups[("C1", "Joe")]
    assert joe.metrics["takeoff_v"].mean == pytest.approx(0.375422312, abs=5e-9)
    nigel = groups[("C1", "Nigel")]
    assert nigel.metrics["takeoff_v"].n == 48   # repeated clip rows counted as printed
    assert nigel.metrics["takeoff_v"].mean == pytest.approx(0.528013827, abs=5e-9)
