"""3D track reconstruction, phase splitting, and point-cloud export.

All positions are meters in the rig's world frame. Exported CSVs keep
full float precision (``repr``) so downstream stages lose nothing when
they re-enter the pipeline from files.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCamera,
    DegenerateRays,
    HighResidualWarning,
    MissingPhase,
    PointDroppedWarning,
    ReconstructionFailed,
    UnsupportedFormat,
)
from .geometry import StereoRig, triangulate
from .ingest import ClipMeta, PairedFrames, PHASES

DEFAULT_MAX_RESIDUAL_PX = 5.0

# Integer encoding used for the PLY per-vertex phase property.
PHASE_CODES = {phase: i for i, phase in enumerate(PHASES)}
UNLABELED_PHASE_CODE = -1


@dataclass(frozen=True)
class TrackPoint:
    frame_index: int
    position: np.ndarray
    phase: str | None
    residual_px: float
    gap_before: bool = False


@dataclass(frozen=True)
class FlightTrack:
    clip_id: str
    meta: ClipMeta | None
    points: tuple[TrackPoint, ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("a track needs at least two points")
        idx = [p.frame_index for p in self.points]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("frame indices must be strictly increasing")


@dataclass(frozen=True)
class PhaseRun:
    """Maximal run of consecutive track points sharing one phase."""

    phase: str
    points: tuple[TrackPoint, ...]

    @property
    def kinematic(self) -> bool:
        return self.phase != "sitting"


def reconstruct_track(paired: PairedFrames, rig: StereoRig,
                      meta: ClipMeta | None = None,
                      max_residual_px: float = DEFAULT_MAX_RESIDUAL_PX,
                      drop_flagged: bool = False) -> FlightTrack:
    """Triangulate every paired midpoint into a 3D track.

    Frames whose rays are degenerate or land behind a camera are skipped
    with a PointDroppedWarning. Points whose reprojection residual
    exceeds ``max_residual_px`` are kept (and warned about) unless
    ``drop_flagged`` is set. ``gap_before`` marks points whose previous
    retained frame is not the immediately preceding index.

    Raises:
        ReconstructionFailed: fewer than two points survive.
    """
    points: list[TrackPoint] = []
    dropped: list[int] = []
    flagged: list[int] = []
    prev_index: int | None = None
    for frame in paired.frames:
        try:
            position, residual = triangulate(rig, frame.midpoint_cam1, frame.midpoint_cam2)
        except (DegenerateRays, BehindCamera) as exc:
            dropped.append(frame.frame_index)
            warnings.warn(f"{paired.clip_id} frame {frame.frame_index}: {exc}",
                          PointDroppedWarning, stacklevel=2)
            continue
        if residual > max_residual_px:
            flagged.append(frame.frame_index)
            if drop_flagged:
                dropped.append(frame.frame_index)
                continue
        points.append(TrackPoint(frame_index=frame.frame_index, position=position,
                                 phase=frame.phase, residual_px=residual,
                                 gap_before=prev_index is not None and frame.frame_index - prev_index > 1))
        prev_index = frame.frame_index
    if flagged:
        warnings.warn(
            f"{paired.clip_id}: {len(flagged)} points above {max_residual_px} px residual"
            f"{' (dropped)' if drop_flagged else ''}: frames {flagged}",
            HighResidualWarning, stacklevel=2)
    if len(points) < 2:
        raise ReconstructionFailed(
            f"{paired.clip_id}: only {len(points)} of {len(paired.frames)} frames triangulated")
    return FlightTrack(clip_id=paired.clip_id, meta=meta, points=tuple(points))


def split_phases(track: FlightTrack) -> list[PhaseRun]:
    """Maximal contiguous runs of equal phase, in track order.

    Raises:
        MissingPhase: any point lacks a label.
    """
    for p in track.points:
        if p.phase is None:
            raise MissingPhase(f"{track.clip_id} frame {p.frame_index} has no phase label")
    runs: list[PhaseRun] = []
    start = 0
    for i in range(1, len(track.points) + 1):
        if i == len(track.points) or track.points[i].phase != track.points[start].phase:
            runs.append(PhaseRun(phase=track.points[start].phase,
                                 points=tuple(track.points[start:i])))
            start = i
    return runs


def _fmt(value: float) -> str:
    return repr(float(value))


def export_pointcloud(track: FlightTrack, format: str = "csv") -> bytes:
    """Serialize a track as CSV or ASCII PLY; byte-deterministic.

    The PLY encodes the phase as an integer vertex property using
    PHASE_CODES (-1 for unlabeled points).

    Raises:
        UnsupportedFormat: format not "csv" or "ply".
    """
    if format == "csv":
        out = io.StringIO()
        out.write("frame,x_m,y_m,z_m,phase,residual_px,gap_before\n")
        for p in track.points:
            phase = p.phase if p.phase is not None else ""
            out.write(f"{p.frame_index},{_fmt(p.position[0])},{_fmt(p.position[1])},"
                      f"{_fmt(p.position[2])},{phase},{_fmt(p.residual_px)},{int(p.gap_before)}\n")
        return out.getvalue().encode("utf-8")
    if format == "ply":
        out = io.StringIO()
        out.write("ply\nformat ascii 1.0\n")
        out.write(f"comment clip {track.clip_id}\n")
        out.write("comment phase codes: " +
                  " ".join(f"{name}={code}" for name, code in PHASE_CODES.items()) +
                  " unlabeled=-1\n")
        out.write(f"element vertex {len(track.points)}\n")
        out.write("property double x\nproperty double y\nproperty double z\n")
        out.write("property int phase\nproperty double residual_px\n")
        out.write("end_header\n")
        for p in track.points:
            code = PHASE_CODES.get(p.phase, UNLABELED_PHASE_CODE) if p.phase else UNLABELED_PHASE_CODE
            out.write(f"{_fmt(p.position[0])} {_fmt(p.position[1])} {_fmt(p.position[2])} "
                      f"{code} {_fmt(p.residual_px)}\n")
        return out.getvalue().encode("utf-8")
    raise UnsupportedFormat(f"unknown export format {format!r}")


def load_track_csv(source, clip_id: str, meta: ClipMeta | None = None) -> FlightTrack:
    """Read a trajectory CSV written by :func:`export_pointcloud`.

    Also accepts externally converted files as long as they carry the
    same header; ``residual_px`` and ``gap_before`` may be empty, in
    which case they default to 0.
    """
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
    for needed in ("frame", "x_m", "y_m", "z_m"):
        if needed not in col:
            raise ValueError(f"trajectory CSV missing column {needed!r}")
    points = []
    for ln in lines[1:]:
        parts = ln.split(",")
        phase = parts[col["phase"]] if "phase" in col and parts[col["phase"]] else None
        residual = float(parts[col["residual_px"]]) if "residual_px" in col and parts[col["residual_px"]] else 0.0
        gap = bool(int(parts[col["gap_before"]])) if "gap_before" in col and parts[col["gap_before"]] else False
        points.append(TrackPoint(
            frame_index=int(parts[col["frame"]]),
            position=np.array([float(parts[col["x_m"]]), float(parts[col["y_m"]]),
                               float(parts[col["z_m"]])]),
            phase=phase, residual_px=residual, gap_before=gap))
    return FlightTrack(clip_id=clip_id, meta=meta, points=tuple(points))
