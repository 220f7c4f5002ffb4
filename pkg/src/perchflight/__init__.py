"""Stereo reconstruction and kinematic analysis of perch-to-perch bird flights.

The package turns paired stereo-camera annotations into 3D flight
tracks, computes phase-segmented velocity and acceleration with a
chained constant-acceleration scheme, and aggregates per-bird and
per-category statistics with table and figure outputs.
"""

from .errors import PerchflightError
from .geometry import (
    CameraModel,
    RigidTransform,
    StereoRig,
    load_rig,
    make_converging_rig,
    project_point,
    reprojection_error,
    save_rig,
    triangulate,
)
from .ingest import (
    BBox,
    BIRDS,
    CATEGORIES,
    ClipMeta,
    KINEMATIC_PHASES,
    LABELS,
    Observation,
    PHASES,
    PairedFrames,
    ValidationReport,
    bbox_midpoint,
    load_manifest,
    pair_streams,
    parse_annotations,
    validate_clip,
)
from .kinematics import (
    ClipKinematics,
    PhaseKinematics,
    SegmentKinematics,
    clip_kinematics,
    clip_summary,
    flight_chain,
    path_speed,
    phase_chain,
    segment_step,
)
from .pipeline import RunConfig, run_pipeline
from .stats import (
    ClipSummary,
    GroupSummary,
    MetricStats,
    emit_table,
    group_summaries,
    overall_summary,
    sd,
)
from .synth import (
    GroundTruth,
    PhaseSegment,
    SynthFlightSpec,
    synth_annotations,
    synth_track,
)
from .trajectory import (
    FlightTrack,
    PhaseRun,
    TrackPoint,
    export_pointcloud,
    load_track_csv,
    reconstruct_track,
    split_phases,
)

__version__ = "0.1.0"
