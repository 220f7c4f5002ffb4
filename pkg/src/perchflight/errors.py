"""Exception hierarchy and data-quality warning categories."""

from __future__ import annotations


class PerchflightError(Exception):
    """Base class for all errors raised by this package."""


# --- stereo geometry ---

class NonPositiveDepth(PerchflightError):
    """Point sits at or behind the camera's principal plane."""


class DegenerateRays(PerchflightError):
    """Back-projected viewing rays are too close to parallel to intersect."""


class BehindCamera(PerchflightError):
    """Triangulated point has non-positive depth in one of the views."""


# --- annotation ingest ---

class MalformedJson(PerchflightError):
    """Annotation file is not valid JSON or violates the expected subset."""


class UnknownCategory(PerchflightError):
    """Annotation category name outside the five supported labels."""


class MissingImageRef(PerchflightError):
    """Annotation references an image id that is not in the file."""


class DuplicateBirdLabel(PerchflightError):
    """More than one bird box on the same (camera, frame)."""


class PhaseMismatch(PerchflightError):
    """The two cameras disagree about a frame's motion phase."""


class EmptyIntersection(PerchflightError):
    """The two cameras share no annotated frames."""


class ManifestError(PerchflightError):
    """Clip manifest is missing columns or contains unparseable rows."""


# --- trajectory ---

class MissingPhase(PerchflightError):
    """A track point (or a whole phase) lacks the label an operation needs."""


class ReconstructionFailed(PerchflightError):
    """Fewer than two paired frames survived triangulation."""


class UnsupportedFormat(PerchflightError):
    """Requested export format is not csv or ply."""


# --- kinematics ---

class NonPositiveInterval(PerchflightError):
    """Segment time interval must be strictly positive."""


class TooFewPoints(PerchflightError):
    """Not enough points to form at least one segment."""


# --- aggregate stats ---

class InsufficientData(PerchflightError):
    """Too few values for the requested standard-deviation convention."""


class LayoutMismatch(PerchflightError):
    """Rows handed to a table emitter do not fit the requested layout."""


class EmptyInput(PerchflightError):
    """Operation needs at least one row."""


# --- flight synthesis ---

class InfeasiblePlan(PerchflightError):
    """A phase plan would drive the path speed negative mid-flight."""


class OutOfFrame(PerchflightError):
    """A synthesized position projects outside a camera's image."""


# --- warnings (recoverable data-quality findings) ---

class DataQualityWarning(UserWarning):
    """Base category for findings that do not abort processing."""


class DroppedFramesWarning(DataQualityWarning):
    """Frames present in only one camera were dropped during pairing."""


class DuplicateClipWarning(DataQualityWarning):
    """Manifest listed the same clip id more than once."""


class ClippedBoxWarning(DataQualityWarning):
    """Bounding box extends past the image bounds."""


class HighResidualWarning(DataQualityWarning):
    """Triangulated point exceeded the reprojection-residual threshold."""


class PhaseSourceWarning(DataQualityWarning):
    """Phase labels were taken from camera 2 because camera 1 had none."""


class IncompleteLabelsWarning(DataQualityWarning):
    """A frame's labels are not exactly {bird, head, tail, left-wing, right-wing}."""


class PointDroppedWarning(DataQualityWarning):
    """A paired frame could not be triangulated and was skipped."""
