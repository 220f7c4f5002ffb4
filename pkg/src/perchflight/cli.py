"""Command-line entry points.

Subcommands mirror the pipeline stages so a run can start anywhere:
``simulate`` fabricates data, ``reconstruct`` produces trajectories,
``kinematics`` turns trajectories into per-segment tables and clip
summaries, ``aggregate`` and ``plot`` consume the summary file, and
``run`` chains everything. Exit status: 0 all clips ok, 1 some clips
failed, 2 configuration or I/O error. Set PERCHFLIGHT_LOG to change
the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import pipeline
from .errors import PerchflightError
from .geometry import load_rig, make_converging_rig, save_rig
from .ingest import BIRDS, CATEGORIES, ClipMeta, load_manifest
from .kinematics import clip_kinematics, clip_summary, kinematics_to_csv
from .pipeline import EXIT_CLIP_FAILURES, EXIT_CONFIG_ERROR, EXIT_OK, RunConfig
from .stats import clip_sort_key, summaries_from_csv, summaries_to_csv
from .synth import (
    flight_spec_from_dict,
    flight_spec_to_dict,
    ground_truth_to_csv,
    load_flight_spec,
    synth_annotations,
    synth_track,
)
from .trajectory import load_track_csv

logger = logging.getLogger(__name__)


def _add_common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--rig", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--fps", type=float, default=None, help="override the manifest fps")
    p.add_argument("--max-residual-px", type=float, default=5.0)
    p.add_argument("--drop-flagged", action="store_true",
                   help="drop points above the residual threshold instead of keeping them")
    p.add_argument("--jobs", type=int, default=1)


def _add_stat_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sd", choices=("sample", "population"), default="sample")
    p.add_argument("--weighting", choices=("by_clip", "by_bird"), default="by_clip")


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        manifest=args.manifest, rig=args.rig, out_dir=args.out_dir,
        fps_override=args.fps, max_residual_px=args.max_residual_px,
        drop_flagged=args.drop_flagged,
        sd_convention=getattr(args, "sd", "sample"),
        weighting=getattr(args, "weighting", "by_clip"),
        jobs=args.jobs)


def cmd_run(args: argparse.Namespace) -> int:
    return pipeline.run_pipeline(_run_config(args))


def cmd_reconstruct(args: argparse.Namespace) -> int:
    return pipeline.run_pipeline(_run_config(args), do_kinematics=False, do_aggregate=False)


def cmd_kinematics(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.traj is not None:
        clip_id = args.clip_id or Path(args.traj).name.split(".")[0]
        meta = ClipMeta(clip_id=clip_id, bird=args.bird, category=args.category, fps=args.fps)
        track = load_track_csv(args.traj, clip_id, meta)
        ck = clip_kinematics(track, meta)
        if ck.segments:
            (out_dir / f"{clip_id}.kin.csv").write_bytes(kinematics_to_csv(ck))
        summary = clip_summary(ck, meta)
        (out_dir / f"{clip_id}.summary.csv").write_bytes(summaries_to_csv([summary]))
        return EXIT_OK
    if args.manifest is None:
        raise PerchflightError("kinematics needs either --traj or --manifest")
    metas, _ = load_manifest(args.manifest)
    traj_dir = Path(args.traj_dir) if args.traj_dir else out_dir
    results = pipeline.analyze_tracks(metas, traj_dir, out_dir, fps_override=args.fps)
    results.sort(key=lambda r: clip_sort_key(r.clip_id))
    rows = [r.summary for r in results if r.summary is not None]
    (out_dir / "clip_summary.csv").write_bytes(summaries_to_csv(rows))
    failed = [r for r in results if r.status == "failed"]
    for r in failed:
        logger.error("clip %s: %s", r.clip_id, r.reason)
    return EXIT_CLIP_FAILURES if failed else EXIT_OK


def cmd_aggregate(args: argparse.Namespace) -> int:
    return pipeline.aggregate_from_files(args.clip_summary, Path(args.out_dir),
                                         args.sd, args.weighting)


def cmd_plot(args: argparse.Namespace) -> int:
    rows = summaries_from_csv(args.clip_summary)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = pipeline.write_figures(rows, out_dir, args.sd, args.weighting)
    if not written:
        logger.error("no figure has data")
        return EXIT_CONFIG_ERROR
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base_spec = load_flight_spec(args.spec)
    if args.rig is not None:
        rig = load_rig(args.rig)
    else:
        rig = make_converging_rig()
    save_rig(rig, out_dir / "rig.json")

    base_seed = args.seed if args.seed is not None else base_spec.seed
    manifest_lines = ["clip_id,bird,category,direction_code,note_code,fps,cam1_file,cam2_file"]
    category = "C1" if any(s.phase == "takeoff" for s in base_spec.phase_plan) else "C3"
    for i in range(args.clips):
        clip_id = f"synth{i + 1:03d}"
        spec_dict = flight_spec_to_dict(base_spec)
        spec_dict["seed"] = base_seed + i
        spec = flight_spec_from_dict(spec_dict)
        gt = synth_track(spec)
        cam1_bytes, cam2_bytes = synth_annotations(gt, rig, spec, clip_id=clip_id)
        (out_dir / f"{clip_id}_cam1.json").write_bytes(cam1_bytes)
        (out_dir / f"{clip_id}_cam2.json").write_bytes(cam2_bytes)
        (out_dir / f"{clip_id}.groundtruth.csv").write_bytes(ground_truth_to_csv(gt))
        bird = BIRDS[i % len(BIRDS)]
        manifest_lines.append(f"{clip_id},{bird},{category},,,{spec.fps:g},"
                              f"{clip_id}_cam1.json,{clip_id}_cam2.json")
    (out_dir / "manifest.csv").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    logger.info("wrote %d synthetic clips to %s", args.clips, out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perchflight",
                                     description="Stereo flight-trajectory analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: reconstruct, kinematics, aggregate, plot")
    _add_common_run_flags(p)
    _add_stat_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reconstruct", help="trajectories only")
    _add_common_run_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("kinematics", help="per-segment kinematics from trajectory CSVs")
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--traj-dir", type=Path, default=None,
                   help="directory holding <clip>.traj.csv files (default: --out-dir)")
    p.add_argument("--traj", type=Path, default=None, help="single bare trajectory CSV")
    p.add_argument("--clip-id", default=None)
    p.add_argument("--category", choices=[c for c in CATEGORIES if c != "RANDOM"], default="C1")
    p.add_argument("--bird", choices=BIRDS, default="Nigel")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--out-dir", required=True, type=Path)
    p.set_defaults(func=cmd_kinematics)

    p = sub.add_parser("aggregate", help="group statistics from clip_summary.csv")
    p.add_argument("--clip-summary", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    _add_stat_flags(p)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("plot", help="figures from clip_summary.csv")
    p.add_argument("--clip-summary", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    _add_stat_flags(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("simulate", help="generate synthetic clips from a flight spec")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--rig", type=Path, default=None,
                   help="rig JSON (default: built-in converging rig)")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--clips", type=int, default=1)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("PERCHFLIGHT_LOG", "WARNING").upper())
    try:
        return args.func(args)
    except (PerchflightError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        print(f"perchflight: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
