"""COCO-subset annotation parsing, frame pairing, and clip validation.

Annotation files are JSON with three arrays::

    images:      [{id, file_name, width, height, frame_index}]
    categories:  [{id, name}]          # name in LABELS
    annotations: [{id, image_id, category_id, bbox: [x, y, w, h],
                   attributes: {"phase": str}?}]

The clip manifest is a CSV with header
``clip_id,bird,category,direction_code,note_code,fps,cam1_file,cam2_file``.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DroppedFramesWarning,
    DuplicateBirdLabel,
    DuplicateClipWarning,
    ClippedBoxWarning,
    EmptyIntersection,
    IncompleteLabelsWarning,
    MalformedJson,
    ManifestError,
    MissingImageRef,
    PhaseMismatch,
    PhaseSourceWarning,
    UnknownCategory,
)

LABELS = ("bird", "head", "tail", "left-wing", "right-wing")
PHASES = ("sitting", "takeoff", "flying", "landing")
KINEMATIC_PHASES = ("takeoff", "flying", "landing")
BIRDS = ("Nigel", "Hedwig", "Ava", "Joe")
CATEGORIES = ("C1", "C2_SDF", "C2_ODF", "C2_S", "C3", "RANDOM")
DIRECTION_CODES = ("lr", "rl", "rr", "r", "l")
DEFAULT_FPS = 30.0

# Required kinematic phases per category; RANDOM clips have no pattern.
REQUIRED_PHASES = {
    "C1": ("takeoff", "flying", "landing"),
    "C2_SDF": ("takeoff", "flying", "landing"),
    "C2_ODF": ("takeoff", "flying", "landing"),
    "C2_S": ("takeoff", "flying", "landing"),
    "C3": ("flying", "landing"),
    "RANDOM": (),
}


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, top-left corner plus size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got {self.w} x {self.h}")


@dataclass(frozen=True)
class Observation:
    clip_id: str
    camera_id: int
    frame_index: int
    label: str
    bbox: BBox
    phase: str | None = None


@dataclass(frozen=True)
class ClipMeta:
    clip_id: str
    bird: str
    category: str
    direction_code: str | None = None
    note_code: int | None = None
    fps: float = DEFAULT_FPS
    resolution: tuple[int, int] = (1920, 1080)
    cam1_file: str = ""
    cam2_file: str = ""

    def __post_init__(self) -> None:
        if self.bird not in BIRDS:
            raise ValueError(f"unknown bird {self.bird!r}")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.direction_code is not None and self.direction_code not in DIRECTION_CODES:
            raise ValueError(f"unknown direction code {self.direction_code!r}")
        if self.note_code is not None and not 1 <= self.note_code <= 6:
            raise ValueError(f"note code {self.note_code!r} outside 1..6")
        if not self.fps > 0:
            raise ValueError("fps must be positive")


@dataclass(frozen=True)
class PairedFrame:
    frame_index: int
    midpoint_cam1: np.ndarray
    midpoint_cam2: np.ndarray
    phase: str | None = None


@dataclass(frozen=True)
class PairedFrames:
    clip_id: str
    frames: tuple[PairedFrame, ...]


@dataclass(frozen=True)
class ValidationReport:
    """Findings from checking one clip; never raises, only records."""

    clip_id: str
    passed: bool
    phase_order_ok: bool
    phase_counts: dict[str, int]
    missing_frames: tuple[int, ...]
    issues: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "passed": self.passed,
            "phase_order_ok": self.phase_order_ok,
            "phase_counts": dict(self.phase_counts),
            "missing_frames": list(self.missing_frames),
            "issues": list(self.issues),
        }


def bbox_midpoint(b: BBox) -> np.ndarray:
    """Center of the box: (x + w/2, y + h/2)."""
    return np.array([b.x + b.w / 2.0, b.y + b.h / 2.0])


def parse_annotations(data, clip_id: str, camera_id: int) -> list[Observation]:
    """Parse one camera's annotation file into Observations.

    ``data`` may be bytes or str holding the JSON document. Boxes that
    extend past the image bounds are kept with a ClippedBoxWarning.

    Raises:
        MalformedJson: not JSON, or the subset schema is violated.
        UnknownCategory: a category name outside the five labels.
        MissingImageRef: an annotation pointing at a missing image id.
        DuplicateBirdLabel: two bird boxes on one frame.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"{clip_id} cam{camera_id}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedJson(f"{clip_id} cam{camera_id}: top level is not an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise MalformedJson(f"{clip_id} cam{camera_id}: missing array {key!r}")

    try:
        images = {int(im["id"]): (int(im["frame_index"]), float(im["width"]), float(im["height"]))
                  for im in doc["images"]}
        cat_names = {int(c["id"]): str(c["name"]) for c in doc["categories"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedJson(f"{clip_id} cam{camera_id}: bad image/category record ({exc})") from exc
    for name in cat_names.values():
        if name not in LABELS:
            raise UnknownCategory(name)

    observations: list[Observation] = []
    bird_frames: set[int] = set()
    clipped: list[int] = []
    for ann in doc["annotations"]:
        try:
            ann_id = ann["id"]
            image_id = int(ann["image_id"])
            cat_id = int(ann["category_id"])
            x, y, w, h = (float(v) for v in ann["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedJson(f"{clip_id} cam{camera_id}: bad annotation record ({exc})") from exc
        if image_id not in images:
            raise MissingImageRef(f"annotation {ann_id} references missing image {image_id}")
        if cat_id not in cat_names:
            raise UnknownCategory(f"annotation {ann_id} references missing category {cat_id}")
        frame_index, img_w, img_h = images[image_id]
        try:
            box = BBox(x, y, w, h)
        except ValueError as exc:
            raise MalformedJson(f"{clip_id} cam{camera_id}: annotation {ann_id}: {exc}") from exc
        if x < 0 or y < 0 or x + w > img_w or y + h > img_h:
            clipped.append(frame_index)
        label = cat_names[cat_id]
        phase = None
        attrs = ann.get("attributes") or {}
        if "phase" in attrs and attrs["phase"] is not None:
            phase = str(attrs["phase"])
            if phase not in PHASES:
                raise MalformedJson(f"{clip_id} cam{camera_id}: unknown phase {phase!r} at frame {frame_index}")
        if label == "bird":
            if frame_index in bird_frames:
                raise DuplicateBirdLabel(f"{clip_id} cam{camera_id}: frame {frame_index}")
            bird_frames.add(frame_index)
        observations.append(Observation(clip_id=clip_id, camera_id=camera_id,
                                        frame_index=frame_index, label=label,
                                        bbox=box, phase=phase))
    if clipped:
        warnings.warn(
            f"{clip_id} cam{camera_id}: {len(clipped)} boxes extend past the image bounds "
            f"(frames {sorted(set(clipped))[:10]}...)",
            ClippedBoxWarning, stacklevel=2)
    # every annotated frame should carry each of the five labels exactly once
    per_frame: dict[int, list[str]] = {}
    for o in observations:
        per_frame.setdefault(o.frame_index, []).append(o.label)
    incomplete = sorted(f for f, labels in per_frame.items() if sorted(labels) != sorted(LABELS))
    if incomplete:
        warnings.warn(f"{clip_id} cam{camera_id}: frames without the full label set: "
                      f"{incomplete[:10]}{'...' if len(incomplete) > 10 else ''}",
                      IncompleteLabelsWarning, stacklevel=2)
    observations.sort(key=lambda o: (o.frame_index, LABELS.index(o.label)))
    return observations


def pair_streams(cam1: list[Observation], cam2: list[Observation]) -> PairedFrames:
    """Inner-join bird observations of the two cameras on frame index.

    The phase comes from camera 1; camera 2's label, when present, must
    agree. Frames where only camera 2 carried a phase use that value and
    are reported with a PhaseSourceWarning. Frames present in only one
    camera are dropped with a DroppedFramesWarning.

    Raises:
        PhaseMismatch: cameras disagree on a frame's phase.
        EmptyIntersection: no frame is annotated in both cameras.
    """
    birds1 = {o.frame_index: o for o in cam1 if o.label == "bird"}
    birds2 = {o.frame_index: o for o in cam2 if o.label == "bird"}
    clip_ids = {o.clip_id for o in cam1} | {o.clip_id for o in cam2}
    if len(clip_ids) > 1:
        raise ValueError(f"observations span multiple clips: {sorted(clip_ids)}")
    clip_id = clip_ids.pop() if clip_ids else ""

    common = sorted(set(birds1) & set(birds2))
    if not common:
        raise EmptyIntersection(f"{clip_id}: cameras share no annotated frames")
    dropped = sorted(set(birds1) ^ set(birds2))
    if dropped:
        warnings.warn(f"{clip_id}: dropped frames annotated in one camera only: {dropped}",
                      DroppedFramesWarning, stacklevel=2)

    frames = []
    cam2_sourced = []
    for idx in common:
        o1, o2 = birds1[idx], birds2[idx]
        if o1.phase is not None and o2.phase is not None and o1.phase != o2.phase:
            raise PhaseMismatch(f"{clip_id} frame {idx}: {o1.phase!r} vs {o2.phase!r}")
        phase = o1.phase if o1.phase is not None else o2.phase
        if o1.phase is None and o2.phase is not None:
            cam2_sourced.append(idx)
        frames.append(PairedFrame(frame_index=idx,
                                  midpoint_cam1=bbox_midpoint(o1.bbox),
                                  midpoint_cam2=bbox_midpoint(o2.bbox),
                                  phase=phase))
    if cam2_sourced:
        warnings.warn(f"{clip_id}: phase taken from camera 2 on frames {cam2_sourced}",
                      PhaseSourceWarning, stacklevel=2)
    return PairedFrames(clip_id=clip_id, frames=tuple(frames))


def _phase_runs(phases: list[str]) -> list[str]:
    runs = []
    for p in phases:
        if not runs or runs[-1] != p:
            runs.append(p)
    return runs


def _order_ok(run_phases: list[str], category: str) -> bool:
    if category == "RANDOM":
        return True
    if category == "C3":
        return run_phases == ["flying", "landing"]
    core = [p for p in run_phases if p != "sitting"]
    if core != ["takeoff", "flying", "landing"]:
        return False
    # sitting allowed only before takeoff and after landing
    first = run_phases.index("takeoff")
    last = run_phases.index("landing")
    return (all(p == "sitting" for p in run_phases[:first])
            and all(p == "sitting" for p in run_phases[last + 1:]))


def validate_clip(paired: PairedFrames, meta: ClipMeta) -> ValidationReport:
    """Check phase ordering, frame gaps, and per-phase point counts.

    A clip fails when its phase order violates the category's pattern or
    when any required phase carries fewer than two points. All findings
    are recorded; nothing raises.
    """
    issues: list[str] = []
    phases = [f.phase for f in paired.frames]
    counts: dict[str, int] = {}
    for p in phases:
        key = p if p is not None else "unlabeled"
        counts[key] = counts.get(key, 0) + 1

    labeled = [p for p in phases if p is not None]
    required = REQUIRED_PHASES[meta.category]
    if not labeled:
        phase_order_ok = meta.category == "RANDOM"
        if not phase_order_ok:
            issues.append("no phase labels; only whole-track path speed is possible")
    elif any(p is None for p in phases):
        phase_order_ok = False
        issues.append("some frames lack a phase label")
    else:
        phase_order_ok = _order_ok(_phase_runs(labeled), meta.category)
        if not phase_order_ok:
            issues.append(f"phase order {_phase_runs(labeled)} violates the {meta.category} pattern")

    too_few = [p for p in required if counts.get(p, 0) < 2]
    if too_few:
        issues.append(f"required phases with < 2 points: {too_few}")

    indices = [f.frame_index for f in paired.frames]
    missing = tuple(i for i in range(indices[0], indices[-1] + 1) if i not in set(indices))
    if missing:
        issues.append(f"{len(missing)} missing frame indices")

    passed = phase_order_ok and not too_few
    return ValidationReport(clip_id=paired.clip_id, passed=passed,
                            phase_order_ok=phase_order_ok, phase_counts=counts,
                            missing_frames=missing, issues=tuple(issues))


MANIFEST_COLUMNS = ("clip_id", "bird", "category", "direction_code",
                    "note_code", "fps", "cam1_file", "cam2_file")


def load_manifest(source) -> tuple[list[ClipMeta], list[str]]:
    """Read the clip manifest CSV.

    ``source`` is a path or a str/bytes CSV body. Returns the metas in
    file order plus the clip ids that appeared more than once; repeats
    keep their first row and emit a DuplicateClipWarning.

    Raises:
        ManifestError: missing columns or unparseable rows.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, "r", encoding="utf-8", newline="") as f:
            text = f.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not set(MANIFEST_COLUMNS) <= set(reader.fieldnames):
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames or ())
        raise ManifestError(f"manifest missing columns: {sorted(missing)}")

    metas: list[ClipMeta] = []
    seen: dict[str, int] = {}
    duplicates: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        clip_id = (row["clip_id"] or "").strip()
        if not clip_id:
            raise ManifestError(f"manifest line {lineno}: empty clip_id")
        if clip_id in seen:
            duplicates.append(clip_id)
            continue
        seen[clip_id] = lineno
        try:
            meta = ClipMeta(
                clip_id=clip_id,
                bird=row["bird"].strip(),
                category=row["category"].strip().upper(),
                direction_code=(row["direction_code"].strip() or None) if row["direction_code"] else None,
                note_code=int(row["note_code"]) if (row["note_code"] or "").strip() else None,
                fps=float(row["fps"]) if (row["fps"] or "").strip() else DEFAULT_FPS,
                cam1_file=(row["cam1_file"] or "").strip(),
                cam2_file=(row["cam2_file"] or "").strip(),
            )
        except ValueError as exc:
            raise ManifestError(f"manifest line {lineno}: {exc}") from exc
        metas.append(meta)
    if duplicates:
        warnings.warn(f"manifest lists clips more than once: {sorted(set(duplicates))}",
                      DuplicateClipWarning, stacklevel=2)
    return metas, duplicates
