"""Manifest-driven batch runs: reconstruct, analyze, aggregate, plot.

Every per-clip artifact is written by the clip's own worker; global
artifacts are produced from results sorted by clip id after all workers
finish, so output bytes do not depend on the parallelism degree. One
bad clip never aborts a run; it is recorded as failed in the run report
and the exit status becomes 1.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import PerchflightError
from .geometry import StereoRig, load_rig
from .ingest import ClipMeta, load_manifest, pair_streams, parse_annotations, validate_clip
from .kinematics import clip_kinematics, clip_summary, kinematics_to_csv, path_speed
from .plots import PLOT_KINDS, plot_summary
from .stats import (
    ClipSummary,
    clip_sort_key,
    emit_table,
    group_summaries,
    overall_summary,
    summaries_from_csv,
    summaries_to_csv,
)
from .trajectory import export_pointcloud, load_track_csv, reconstruct_track

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CLIP_FAILURES = 1
EXIT_CONFIG_ERROR = 2


@dataclass
class RunConfig:
    manifest: Path
    rig: Path | None
    out_dir: Path
    fps_override: float | None = None
    max_residual_px: float = 5.0
    drop_flagged: bool = False
    sd_convention: str = "sample"
    weighting: str = "by_clip"
    jobs: int = 1


@dataclass
class ClipResult:
    clip_id: str
    status: str                       # "ok" or "failed"
    reason: str | None = None
    summary: ClipSummary | None = None
    report: dict | None = None

    def report_entry(self) -> dict:
        entry = {"clip_id": self.clip_id, "status": self.status}
        if self.reason is not None:
            entry["reason"] = self.reason
        entry.update(self.report or {})
        return entry


def _apply_fps(meta: ClipMeta, fps_override: float | None) -> ClipMeta:
    if fps_override is None:
        return meta
    return dataclasses.replace(meta, fps=fps_override)


def process_clip(meta: ClipMeta, rig: StereoRig, manifest_dir: Path, out_dir: Path,
                 max_residual_px: float, drop_flagged: bool,
                 do_kinematics: bool = True) -> ClipResult:
    """Run one clip end to end, writing its per-clip artifacts.

    Failures are captured into the result, never raised.
    """
    report: dict = {}
    try:
        cam1 = parse_annotations((manifest_dir / meta.cam1_file).read_bytes(), meta.clip_id, 1)
        cam2 = parse_annotations((manifest_dir / meta.cam2_file).read_bytes(), meta.clip_id, 2)
        paired = pair_streams(cam1, cam2)
        frames1 = {o.frame_index for o in cam1 if o.label == "bird"}
        frames2 = {o.frame_index for o in cam2 if o.label == "bird"}
        report["dropped_frames"] = sorted(frames1 ^ frames2)

        validation = validate_clip(paired, meta)
        report["validation"] = validation.as_dict()

        track = reconstruct_track(paired, rig, meta,
                                  max_residual_px=max_residual_px,
                                  drop_flagged=drop_flagged)
        (out_dir / f"{meta.clip_id}.traj.csv").write_bytes(export_pointcloud(track, "csv"))
        (out_dir / f"{meta.clip_id}.traj.ply").write_bytes(export_pointcloud(track, "ply"))
        report["n_points"] = len(track.points)
        report["mean_residual_px"] = sum(p.residual_px for p in track.points) / len(track.points)
        report["flagged_frames"] = [p.frame_index for p in track.points
                                    if p.residual_px > max_residual_px]

        t_frame = 1.0 / meta.fps
        if meta.category == "RANDOM" or all(p.phase is None for p in track.points):
            # no kinematic contract; record the whole-track path speed only
            report["whole_track_speed_mps"] = path_speed(track.points, t_frame)
            if not validation.passed:
                return ClipResult(meta.clip_id, "failed", "validation failed", None, report)
            return ClipResult(meta.clip_id, "ok", None, None, report)

        if not validation.passed:
            return ClipResult(meta.clip_id, "failed", "validation failed", None, report)
        if not do_kinematics:
            return ClipResult(meta.clip_id, "ok", None, None, report)

        ck = clip_kinematics(track, meta)
        if ck.segments:
            (out_dir / f"{meta.clip_id}.kin.csv").write_bytes(kinematics_to_csv(ck))
        summary = clip_summary(ck, meta)
        return ClipResult(meta.clip_id, "ok", None, summary, report)
    except (PerchflightError, OSError, ValueError) as exc:
        logger.warning("clip %s failed: %s", meta.clip_id, exc)
        return ClipResult(meta.clip_id, "failed", f"{type(exc).__name__}: {exc}", None, report)


def analyze_tracks(metas: list[ClipMeta], traj_dir: Path, out_dir: Path,
                   fps_override: float | None = None) -> list[ClipResult]:
    """Kinematics over previously exported trajectory CSVs."""
    results = []
    for meta in metas:
        meta = _apply_fps(meta, fps_override)
        try:
            track = load_track_csv(traj_dir / f"{meta.clip_id}.traj.csv", meta.clip_id, meta)
            if meta.category == "RANDOM":
                speed = path_speed(track.points, 1.0 / meta.fps)
                results.append(ClipResult(meta.clip_id, "ok", None, None,
                                          {"whole_track_speed_mps": speed}))
                continue
            ck = clip_kinematics(track, meta)
            if ck.segments:
                (out_dir / f"{meta.clip_id}.kin.csv").write_bytes(kinematics_to_csv(ck))
            results.append(ClipResult(meta.clip_id, "ok", None, clip_summary(ck, meta), {}))
        except (PerchflightError, OSError, ValueError) as exc:
            logger.warning("clip %s failed: %s", meta.clip_id, exc)
            results.append(ClipResult(meta.clip_id, "failed", f"{type(exc).__name__}: {exc}", None, {}))
    return results


def write_aggregates(rows: list[ClipSummary], out_dir: Path,
                     sd_convention: str, weighting: str) -> None:
    """clip_summary.csv, group_summary.csv (with overall rows), category3_speeds.csv."""
    (out_dir / "clip_summary.csv").write_bytes(summaries_to_csv(rows))
    table_rows = []
    if rows:
        groups = group_summaries(rows)
        by_category: dict[str, list] = {}
        for g in groups:
            by_category.setdefault(g.category, []).append(g)
        for category in sorted(by_category):
            table_rows.extend(by_category[category])
            table_rows.append(overall_summary(by_category[category], weighting=weighting))
    (out_dir / "group_summary.csv").write_bytes(
        emit_table(table_rows, "table6", sd_convention=sd_convention))
    c3 = [r for r in rows if r.flying_speed is not None or r.landing_speed is not None]
    (out_dir / "category3_speeds.csv").write_bytes(emit_table(c3, "category3"))


def write_figures(rows: list[ClipSummary], out_dir: Path,
                  sd_convention: str, weighting: str) -> list[str]:
    """Render whichever of the three figure kinds have data."""
    written = []
    if not rows:
        return written
    groups = group_summaries(rows)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    for kind in sorted(PLOT_KINDS):
        try:
            svg = plot_summary(groups, kind, sd_convention=sd_convention, weighting=weighting)
        except PerchflightError:
            continue
        (fig_dir / f"{kind}.svg").write_bytes(svg)
        written.append(kind)
    return written


def run_pipeline(cfg: RunConfig, do_kinematics: bool = True,
                 do_aggregate: bool = True) -> int:
    """Full manifest-driven run. Returns the process exit status.

    Configuration problems (unreadable rig or manifest, bad output
    directory) raise; per-clip problems are isolated into the report.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rig = load_rig(cfg.rig)
    metas, duplicates = load_manifest(cfg.manifest)
    metas = [_apply_fps(m, cfg.fps_override) for m in metas]
    manifest_dir = Path(cfg.manifest).parent

    jobs = max(1, min(cfg.jobs, len(metas) or 1))
    if jobs == 1:
        results = [process_clip(m, rig, manifest_dir, out_dir,
                                cfg.max_residual_px, cfg.drop_flagged, do_kinematics)
                   for m in metas]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda m: process_clip(m, rig, manifest_dir, out_dir,
                                       cfg.max_residual_px, cfg.drop_flagged, do_kinematics),
                metas))
    results.sort(key=lambda r: clip_sort_key(r.clip_id))

    rows = [r.summary for r in results if r.summary is not None]
    if do_kinematics and do_aggregate:
        write_aggregates(rows, out_dir, cfg.sd_convention, cfg.weighting)
        write_figures(rows, out_dir, cfg.sd_convention, cfg.weighting)

    n_failed = sum(1 for r in results if r.status == "failed")
    report = {
        "config": {
            "manifest": str(cfg.manifest),
            "rig": str(cfg.rig),
            "out_dir": str(cfg.out_dir),
            "fps_override": cfg.fps_override,
            "max_residual_px": cfg.max_residual_px,
            "drop_flagged": cfg.drop_flagged,
            "sd_convention": cfg.sd_convention,
            "weighting": cfg.weighting,
        },
        "duplicate_clips": sorted(set(duplicates)),
        "clips": [r.report_entry() for r in results],
        "n_clips": len(results),
        "n_ok": len(results) - n_failed,
        "n_failed": n_failed,
    }
    (out_dir / "run_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_CLIP_FAILURES if n_failed else EXIT_OK


def aggregate_from_files(clip_summary_path: Path, out_dir: Path,
                         sd_convention: str, weighting: str) -> int:
    """Aggregate stage entered mid-pipeline from a clip_summary.csv."""
    rows = summaries_from_csv(clip_summary_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_aggregates(rows, out_dir, sd_convention, weighting)
    return EXIT_OK
