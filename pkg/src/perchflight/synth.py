"""Ground-truth flight synthesis for end-to-end pipeline verification.

A flight is a 1D arc-length profile integrated in closed form from a
piecewise-constant-acceleration phase plan, laid along the straight
line between two perch positions (optionally with a vertical sag bow).
Projecting it through a stereo rig and emitting annotation files gives
the full pipeline a known answer to recover.

Segment accounting matches the analysis side exactly. Between
consecutive frames, the segment belongs to the later frame's phase when
both are kinematic; a segment touching a sitting frame is static and
non-kinematic. The first kinematic phase therefore contributes
``frames - 1`` segments (its first frame is the rest/entry point) and
every later kinematic phase contributes ``frames`` segments, boundary
included.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasiblePlan, OutOfFrame
from .geometry import StereoRig, project_point
from .ingest import KINEMATIC_PHASES, LABELS, PHASES

SPEED_FLOOR = -1e-12  # tolerance when checking the profile never reverses


@dataclass(frozen=True)
class PhaseSegment:
    """One planned phase: its label, frame count, and path acceleration."""

    phase: str
    frames: int
    accel_mps2: float = 0.0


@dataclass(frozen=True)
class SynthFlightSpec:
    """Parameters of one synthetic flight.

    The constructor reconciles the plan with the perch gap: because a
    profile integrated from rest scales linearly with its accelerations,
    all accelerations are rescaled by one factor so the integrated
    displacement equals ``|end - start|`` exactly. A plan already
    consistent with the gap (e.g. built via :meth:`from_plan`) is kept
    bit-for-bit.
    """

    start: np.ndarray
    end: np.ndarray
    phase_plan: tuple[PhaseSegment, ...]
    fps: float = 30.0
    bbox_size_px: float = 40.0
    pixel_noise_sigma: float = 0.0
    seed: int = 0
    entry_speed_mps: float = 0.0
    sag_m: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", np.asarray(self.start, dtype=float).reshape(3))
        object.__setattr__(self, "end", np.asarray(self.end, dtype=float).reshape(3))
        object.__setattr__(self, "phase_plan", tuple(self.phase_plan))
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.pixel_noise_sigma < 0:
            raise ValueError("pixel noise sigma cannot be negative")
        _validate_plan(self.phase_plan, self.entry_speed_mps)

        gap = float(np.linalg.norm(self.end - self.start))
        if gap <= 0:
            raise ValueError("start and end perches must be distinct")
        base = _integrate(self.phase_plan, self.entry_speed_mps, self.fps)
        if abs(base.displacement - gap) > 1e-9:
            # displacement = entry-speed part + acceleration part; only the
            # acceleration part scales, so solve for its factor exactly.
            accel_part = base.displacement - base.entry_part
            target = gap - base.entry_part
            if accel_part == 0.0:
                raise InfeasiblePlan("constant-speed plan cannot be stretched to the perch gap")
            scale = target / accel_part
            object.__setattr__(self, "phase_plan", tuple(
                replace(seg, accel_mps2=seg.accel_mps2 * scale) for seg in self.phase_plan))
        profile = _integrate(self.phase_plan, self.entry_speed_mps, self.fps)
        if min(profile.speeds) < SPEED_FLOOR:
            raise InfeasiblePlan(
                f"speed reaches {min(profile.speeds):.4f} m/s; the path would reverse")

    @classmethod
    def from_plan(cls, start, direction, phase_plan, **kwargs) -> "SynthFlightSpec":
        """Build a spec whose end perch is derived from the plan itself.

        The accelerations are taken literally; ``direction`` only
        orients the flight.
        """
        start = np.asarray(start, dtype=float).reshape(3)
        d = np.asarray(direction, dtype=float).reshape(3)
        norm = float(np.linalg.norm(d))
        if norm == 0:
            raise ValueError("direction must be non-zero")
        plan = tuple(phase_plan)
        entry = float(kwargs.get("entry_speed_mps", 0.0))
        fps = float(kwargs.get("fps", 30.0))
        _validate_plan(plan, entry)
        profile = _integrate(plan, entry, fps)
        end = start + (d / norm) * profile.displacement
        return cls(start=start, end=end, phase_plan=plan, **kwargs)


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-frame and per-segment state of a synthetic flight."""

    fps: float
    phases: tuple[str, ...]
    positions: np.ndarray          # (N, 3) meters
    speeds: np.ndarray             # (N,) m/s along the path
    seg_accels: np.ndarray         # (N-1,) m/s^2 during each segment
    seg_phases: tuple[str, ...]    # (N-1,) phase owning each segment

    def kinematic_segments(self) -> list[tuple[str, float, float]]:
        """(phase, true acceleration, true exit speed) per chained segment.

        Exactly the segments the analysis side produces: sitting-owned
        segments are excluded, boundary segments belong to the later
        phase.
        """
        out = []
        for i, phase in enumerate(self.seg_phases):
            if phase != "sitting":
                out.append((phase, float(self.seg_accels[i]), float(self.speeds[i + 1])))
        return out


@dataclass(frozen=True)
class _Profile:
    speeds: tuple[float, ...]
    seg_accels: tuple[float, ...]
    seg_phases: tuple[str, ...]
    arclens: tuple[float, ...]
    displacement: float
    entry_part: float   # displacement owed to the entry speed alone


def _validate_plan(plan: tuple[PhaseSegment, ...], entry_speed: float) -> None:
    if not plan:
        raise ValueError("phase plan is empty")
    for seg in plan:
        if seg.phase not in PHASES:
            raise ValueError(f"unknown phase {seg.phase!r}")
        if seg.phase == "sitting":
            if seg.frames < 1:
                raise ValueError("sitting needs at least one frame")
        elif seg.frames < 2:
            raise ValueError(f"{seg.phase} needs at least two frames")
    kin = [seg.phase for seg in plan if seg.phase != "sitting"]
    if not kin:
        raise ValueError("plan has no kinematic phase")
    expected = [p for p in KINEMATIC_PHASES if p in kin]
    if kin != expected:
        raise ValueError(f"kinematic phases must appear once each in order, got {kin}")
    if "sitting" in [seg.phase for seg in plan[1:-1]]:
        raise ValueError("sitting is only allowed at the ends of the plan")
    if entry_speed < 0:
        raise ValueError("entry speed cannot be negative")
    if entry_speed != 0.0 and ("takeoff" in kin or plan[0].phase == "sitting"):
        raise ValueError("a non-zero entry speed requires a plan that starts mid-flight")


def _frame_phases(plan: tuple[PhaseSegment, ...]) -> tuple[str, ...]:
    phases: list[str] = []
    for seg in plan:
        phases.extend([seg.phase] * seg.frames)
    return tuple(phases)


def _integrate(plan: tuple[PhaseSegment, ...], entry_speed: float, fps: float) -> _Profile:
    """Closed-form frame-tick integration of the 1D speed/arc-length profile."""
    t = 1.0 / fps
    frame_phases = _frame_phases(plan)
    accel_of = {seg.phase: seg.accel_mps2 for seg in plan if seg.phase != "sitting"}
    speeds = [0.0 if frame_phases[0] == "sitting" else entry_speed]
    arclens = [0.0]
    seg_accels: list[float] = []
    seg_phases: list[str] = []
    moving_time = 0.0
    for j in range(1, len(frame_phases)):
        prev, cur = frame_phases[j - 1], frame_phases[j]
        if prev == "sitting" or cur == "sitting":
            # static: boundary with (or run of) sitting frames
            speeds.append(entry_speed if cur != "sitting" else 0.0)
            arclens.append(arclens[-1])
            seg_accels.append(0.0)
            seg_phases.append("sitting")
            continue
        a = accel_of[cur]
        v = speeds[-1]
        arclens.append(arclens[-1] + v * t + 0.5 * a * t * t)
        speeds.append(v + a * t)
        seg_accels.append(a)
        seg_phases.append(cur)
        moving_time += t
    return _Profile(speeds=tuple(speeds), seg_accels=tuple(seg_accels),
                    seg_phases=tuple(seg_phases), arclens=tuple(arclens),
                    displacement=arclens[-1], entry_part=entry_speed * moving_time)


def synth_track(spec: SynthFlightSpec) -> GroundTruth:
    """Integrate the plan and lay it out in 3D.

    The path is the straight line start -> end; a non-zero ``sag_m``
    bows it downward (toward positive world y) by a half-sine whose ends
    stay on the perches. The sag perturbs positions only, so the
    exactness guarantees hold for ``sag_m = 0``.
    """
    profile = _integrate(spec.phase_plan, spec.entry_speed_mps, spec.fps)
    phases = _frame_phases(spec.phase_plan)
    s = np.asarray(profile.arclens)
    total = profile.displacement
    direction = (spec.end - spec.start) / total
    positions = spec.start[None, :] + s[:, None] * direction[None, :]
    if spec.sag_m != 0.0:
        positions = positions.copy()
        positions[:, 1] += spec.sag_m * np.sin(np.pi * s / total)
    return GroundTruth(fps=spec.fps, phases=phases, positions=positions,
                       speeds=np.asarray(profile.speeds),
                       seg_accels=np.asarray(profile.seg_accels),
                       seg_phases=profile.seg_phases)


# --- annotation emission ---

_SUBLABEL_OFFSETS = {        # fractions of the bird box size
    "head": (0.35, -0.35),
    "tail": (-0.35, 0.35),
    "left-wing": (-0.35, -0.35),
    "right-wing": (0.35, 0.35),
}


def synth_annotations(gt: GroundTruth, rig: StereoRig, spec: SynthFlightSpec,
                      clip_id: str = "synth") -> tuple[bytes, bytes]:
    """Project a ground truth into both cameras as annotation files.

    Every frame gets the five labels; all box centers receive i.i.d.
    Gaussian pixel noise of ``spec.pixel_noise_sigma`` from a generator
    seeded with ``spec.seed``, so identical specs produce byte-identical
    files.

    Raises:
        OutOfFrame: a bird-box center projects outside an image.
    """
    rng = np.random.default_rng(spec.seed)
    poses = rig.camera_poses()
    cams = (rig.camera1, rig.camera2)
    docs = [
        {
            "images": [],
            "categories": [{"id": i + 1, "name": name} for i, name in enumerate(LABELS)],
            "annotations": [],
        }
        for _ in (0, 1)
    ]

    ann_ids = [0, 0]
    size = spec.bbox_size_px
    for frame, (position, phase) in enumerate(zip(gt.positions, gt.phases)):
        for cam_index in (0, 1):
            cam, pose, doc = cams[cam_index], poses[cam_index], docs[cam_index]
            center = project_point(cam, pose, position)
            noisy = center + rng.normal(0.0, spec.pixel_noise_sigma, 2)
            if not cam.contains_pixel(noisy):
                raise OutOfFrame(f"frame {frame}, camera {cam_index + 1}: "
                                 f"center ({noisy[0]:.1f}, {noisy[1]:.1f}) outside image")
            doc["images"].append({
                "id": frame + 1,
                "file_name": f"{clip_id}_cam{cam_index + 1}_{frame:06d}.png",
                "width": cam.image_width,
                "height": cam.image_height,
                "frame_index": frame,
            })
            boxes = [("bird", noisy, size)]
            for label in LABELS[1:]:
                off = _SUBLABEL_OFFSETS[label]
                sub_center = (center + np.array(off) * size
                              + rng.normal(0.0, spec.pixel_noise_sigma, 2))
                boxes.append((label, sub_center, size / 2.0))
            for label, c, box_size in boxes:
                ann_ids[cam_index] += 1
                doc["annotations"].append({
                    "id": ann_ids[cam_index],
                    "image_id": frame + 1,
                    "category_id": LABELS.index(label) + 1,
                    "bbox": [float(c[0] - box_size / 2.0), float(c[1] - box_size / 2.0),
                             float(box_size), float(box_size)],
                    "attributes": {"phase": phase},
                })
    return tuple(json.dumps(doc, sort_keys=True).encode("utf-8") for doc in docs)


def ground_truth_to_csv(gt: GroundTruth) -> bytes:
    """Per-frame truth table (full precision), for inspection and tests."""
    out = io.StringIO()
    out.write("frame,phase,x_m,y_m,z_m,speed_mps,seg_accel_mps2\n")
    for i in range(len(gt.phases)):
        accel = repr(float(gt.seg_accels[i - 1])) if i > 0 else ""
        out.write(f"{i},{gt.phases[i]},{float(gt.positions[i, 0])!r},{float(gt.positions[i, 1])!r},"
                  f"{float(gt.positions[i, 2])!r},{float(gt.speeds[i])!r},{accel}\n")
    return out.getvalue().encode("utf-8")


# --- spec file I/O ---

def flight_spec_to_dict(spec: SynthFlightSpec) -> dict:
    return {
        "start": [float(v) for v in spec.start],
        "end": [float(v) for v in spec.end],
        "phase_plan": [{"phase": s.phase, "frames": s.frames, "accel_mps2": s.accel_mps2}
                       for s in spec.phase_plan],
        "fps": spec.fps,
        "bbox_size_px": spec.bbox_size_px,
        "pixel_noise_sigma": spec.pixel_noise_sigma,
        "seed": spec.seed,
        "entry_speed_mps": spec.entry_speed_mps,
        "sag_m": spec.sag_m,
    }


def flight_spec_from_dict(d: dict) -> SynthFlightSpec:
    return SynthFlightSpec(
        start=np.asarray(d["start"], dtype=float),
        end=np.asarray(d["end"], dtype=float),
        phase_plan=tuple(PhaseSegment(phase=p["phase"], frames=int(p["frames"]),
                                      accel_mps2=float(p.get("accel_mps2", 0.0)))
                         for p in d["phase_plan"]),
        fps=float(d.get("fps", 30.0)),
        bbox_size_px=float(d.get("bbox_size_px", 40.0)),
        pixel_noise_sigma=float(d.get("pixel_noise_sigma", 0.0)),
        seed=int(d.get("seed", 0)),
        entry_speed_mps=float(d.get("entry_speed_mps", 0.0)),
        sag_m=float(d.get("sag_m", 0.0)),
    )


def load_flight_spec(path) -> SynthFlightSpec:
    with open(path, "r", encoding="utf-8") as f:
        return flight_spec_from_dict(json.load(f))
