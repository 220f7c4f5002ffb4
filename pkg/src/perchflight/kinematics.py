"""Per-segment flight kinematics with velocity chaining across phases.

Each pair of consecutive 3D points forms a segment of length ``d``
(Euclidean) traversed in ``t`` seconds. Under a constant-acceleration
assumption the segment's acceleration and exit velocity are::

    a = 2 (d - u t) / t^2
    v = u + a t

where ``u`` is the entry velocity. Segments chain: the exit velocity of
one segment is the entry velocity of the next, takeoff is entered at
rest, and each later phase is entered with the previous phase's exit
velocity. The velocity is a scalar along the path; the formula can make
it negative, and no clamping is ever applied. The final landing
velocity is reported as-is (the perch keeps moving, so it need not be
zero).

Segments that span missing frames stretch ``t`` by the gap (k missing
frames -> t * (k + 1)) and are flagged ``crossed_gap``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MissingPhase, NonPositiveInterval, TooFewPoints
from .ingest import ClipMeta
from .stats import ClipSummary
from .trajectory import FlightTrack, PhaseRun, TrackPoint, split_phases


@dataclass(frozen=True)
class SegmentKinematics:
    seg_index: int
    phase: str
    frame_from: int
    frame_to: int
    d_m: float
    t_s: float
    u_mps: float
    a_mps2: float
    v_mps: float
    crossed_gap: bool = False


@dataclass(frozen=True)
class PhaseKinematics:
    phase: str
    segments: tuple[SegmentKinematics, ...]

    @property
    def mean_v(self) -> float:
        return sum(s.v_mps for s in self.segments) / len(self.segments)

    @property
    def mean_a(self) -> float:
        return sum(s.a_mps2 for s in self.segments) / len(self.segments)

    @property
    def exit_velocity(self) -> float:
        return self.segments[-1].v_mps


@dataclass(frozen=True)
class ClipKinematics:
    clip_id: str
    takeoff: PhaseKinematics | None = None
    flying: PhaseKinematics | None = None
    landing: PhaseKinematics | None = None
    flying_speed: float | None = None
    landing_speed: float | None = None

    @property
    def segments(self) -> tuple[SegmentKinematics, ...]:
        out: list[SegmentKinematics] = []
        for pk in (self.takeoff, self.flying, self.landing):
            if pk is not None:
                out.extend(pk.segments)
        return tuple(out)


def segment_step(d: float, u: float, t: float) -> tuple[float, float]:
    """Constant-acceleration step: a = 2(d - u t)/t^2, v = u + a t.

    Raises:
        NonPositiveInterval: t <= 0.
    """
    if t <= 0:
        raise NonPositiveInterval(f"segment interval {t!r} s must be positive")
    if d < 0:
        raise ValueError("segment distance cannot be negative")
    a = 2.0 * (d - u * t) / (t * t)
    v = u + a * t
    return a, v


def _chain(points: Sequence[TrackPoint], u0: float, t_frame: float,
           phase: str, start_index: int) -> PhaseKinematics:
    if t_frame <= 0:
        raise NonPositiveInterval(f"frame interval {t_frame!r} s must be positive")
    if len(points) < 2:
        raise TooFewPoints(f"{phase}: {len(points)} points cannot form a segment")
    segments: list[SegmentKinematics] = []
    u = u0
    for i, (p0, p1) in enumerate(zip(points, points[1:])):
        steps = p1.frame_index - p0.frame_index
        t = t_frame * steps
        d = float(np.linalg.norm(p1.position - p0.position))
        a, v = segment_step(d, u, t)
        segments.append(SegmentKinematics(
            seg_index=start_index + i, phase=phase,
            frame_from=p0.frame_index, frame_to=p1.frame_index,
            d_m=d, t_s=t, u_mps=u, a_mps2=a, v_mps=v,
            crossed_gap=steps > 1))
        u = v
    return PhaseKinematics(phase=phase, segments=tuple(segments))


def phase_chain(run: PhaseRun | Sequence[TrackPoint], u0: float, t_frame: float,
                phase: str | None = None, start_index: int = 1) -> PhaseKinematics:
    """Chain the segments of a single phase, entering at velocity ``u0``.

    Raises:
        TooFewPoints: fewer than two points.
        NonPositiveInterval: non-positive frame interval.
    """
    if isinstance(run, PhaseRun):
        return _chain(run.points, u0, t_frame, phase or run.phase, start_index)
    if phase is None:
        raise ValueError("phase is required when passing bare points")
    return _chain(tuple(run), u0, t_frame, phase, start_index)


def flight_chain(runs: Sequence[PhaseRun], t_frame: float, clip_id: str = "") -> ClipKinematics:
    """Chain takeoff, flying, and landing into one clip's kinematics.

    Sitting runs are ignored. Takeoff is entered at rest; each later
    phase is entered with the previous phase's exit velocity; the
    boundary segment between two phases (last point of one to first
    point of the next) belongs to the later phase. Because of that
    boundary segment, flying and landing need only one point of their
    own, while takeoff needs two.

    Raises:
        MissingPhase: the three kinematic phases are not present exactly
            once each, in order.
        TooFewPoints: a phase is too short to chain.
    """
    kin = [r for r in runs if r.kinematic]
    order = [r.phase for r in kin]
    if order != ["takeoff", "flying", "landing"]:
        raise MissingPhase(f"{clip_id or 'clip'}: expected takeoff/flying/landing runs, got {order}")
    tk_run, fly_run, land_run = kin

    takeoff = _chain(tk_run.points, 0.0, t_frame, "takeoff", start_index=1)
    fly_points = (tk_run.points[-1],) + fly_run.points
    flying = _chain(fly_points, takeoff.exit_velocity, t_frame, "flying",
                    start_index=1 + len(takeoff.segments))
    land_points = (fly_run.points[-1],) + land_run.points
    landing = _chain(land_points, flying.exit_velocity, t_frame, "landing",
                     start_index=1 + len(takeoff.segments) + len(flying.segments))
    return ClipKinematics(clip_id=clip_id, takeoff=takeoff, flying=flying, landing=landing)


def path_speed(points: Sequence, t_frame: float,
               frame_indices: Sequence[int] | None = None) -> float:
    """Total polyline length divided by elapsed time.

    ``points`` are 3D positions (or TrackPoints). With ``frame_indices``
    (taken from TrackPoints automatically) missing frames add their
    intervals to the elapsed time; otherwise frames are assumed
    consecutive.

    Raises:
        TooFewPoints: fewer than two points.
        NonPositiveInterval: non-positive frame interval.
    """
    if t_frame <= 0:
        raise NonPositiveInterval(f"frame interval {t_frame!r} s must be positive")
    pts = list(points)
    if len(pts) < 2:
        raise TooFewPoints(f"{len(pts)} points cannot form a path")
    if pts and isinstance(pts[0], TrackPoint):
        if frame_indices is None:
            frame_indices = [p.frame_index for p in pts]
        pts = [p.position for p in pts]
    arr = np.asarray(pts, dtype=float)
    total = float(np.sum(np.linalg.norm(np.diff(arr, axis=0), axis=1)))
    if frame_indices is not None:
        elapsed = (frame_indices[-1] - frame_indices[0]) * t_frame
    else:
        elapsed = (len(arr) - 1) * t_frame
    return total / elapsed


def clip_kinematics(track: FlightTrack, meta: ClipMeta | None = None) -> ClipKinematics:
    """Dispatch a labeled track to its category's analysis.

    Categories 1 and 2 run the chained scheme; category 3 reports the
    flying and landing path speeds over each run's own points. RANDOM
    clips have no kinematic contract.
    """
    meta = meta or track.meta
    if meta is None:
        raise ValueError("clip metadata is required to pick the analysis")
    if meta.category == "RANDOM":
        raise ValueError("RANDOM clips have no kinematic contract")
    t_frame = 1.0 / meta.fps
    runs = split_phases(track)
    if meta.category == "C3":
        kin = [r for r in runs if r.kinematic]
        if [r.phase for r in kin] != ["flying", "landing"]:
            raise MissingPhase(f"{track.clip_id}: expected flying/landing runs, "
                               f"got {[r.phase for r in kin]}")
        flying_run, landing_run = kin
        return ClipKinematics(
            clip_id=track.clip_id,
            flying_speed=path_speed(flying_run.points, t_frame),
            landing_speed=path_speed(landing_run.points, t_frame))
    return flight_chain(runs, t_frame, clip_id=track.clip_id)


def clip_summary(ck: ClipKinematics, meta: ClipMeta) -> ClipSummary:
    """One summary row: per-phase mean velocity/acceleration or speeds."""
    def means(pk: PhaseKinematics | None) -> tuple[float | None, float | None]:
        if pk is None:
            return None, None
        return pk.mean_v, pk.mean_a

    tk_v, tk_a = means(ck.takeoff)
    fl_v, fl_a = means(ck.flying)
    ld_v, ld_a = means(ck.landing)
    return ClipSummary(
        clip_id=ck.clip_id, bird=meta.bird, category=meta.category,
        direction_code=meta.direction_code,
        takeoff_v=tk_v, takeoff_a=tk_a,
        flying_v=fl_v, flying_a=fl_a,
        landing_v=ld_v, landing_a=ld_a,
        flying_speed=ck.flying_speed, landing_speed=ck.landing_speed)


def kinematics_to_csv(ck: ClipKinematics) -> bytes:
    """Per-segment CSV for one clip; byte-deterministic."""
    out = io.StringIO()
    out.write("clip_id,seg_index,phase,frame_from,frame_to,d_m,t_s,u_mps,a_mps2,v_mps,crossed_gap\n")
    for s in ck.segments:
        out.write(f"{ck.clip_id},{s.seg_index},{s.phase},{s.frame_from},{s.frame_to},"
                  f"{s.d_m!r},{s.t_s!r},{s.u_mps!r},{s.a_mps2!r},{s.v_mps!r},{int(s.crossed_gap)}\n")
    return out.getvalue().encode("utf-8")
