"""Pinhole stereo geometry: projection, radial distortion, two-view triangulation.

Conventions used throughout:

* The rig's world frame is the camera-1 frame unless the rig carries a
  ``world_transform``, in which case that rigid transform maps camera-1
  coordinates into a room-aligned frame and all world-facing APIs
  (triangulation output, reprojection input) speak that frame instead.
* ``rotation`` / ``translation`` on a rig map camera-1 coordinates into
  camera-2 coordinates: ``x_cam2 = R @ x_cam1 + t``.
* Lengths are meters, image quantities are pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCamera, DegenerateRays, NonPositiveDepth

MIN_DEPTH_M = 1e-6
MIN_RAY_ANGLE_DEG = 0.1
UNDISTORT_MAX_ITERS = 20
UNDISTORT_TOL = 1e-10
ROTATION_TOL = 1e-9


def _as_rotation(values, what: str) -> np.ndarray:
    """Validate a 3x3 orthonormal right-handed rotation matrix."""
    r = np.asarray(values, dtype=float).reshape(3, 3)
    if not np.isfinite(r).all():
        raise ValueError(f"{what}: rotation entries must be finite")
    err = r.T @ r - np.eye(3)
    if np.abs(err).max() > ROTATION_TOL:
        raise ValueError(f"{what}: rotation is not orthonormal (max deviation {np.abs(err).max():.3e})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > ROTATION_TOL:
        raise ValueError(f"{what}: rotation determinant {det!r} is not 1")
    return r


@dataclass(frozen=True)
class CameraModel:
    """Calibrated pinhole camera with up to two radial distortion terms."""

    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int
    skew: float = 0.0
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_width and 0 <= self.cy < self.image_height):
            raise ValueError("principal point must lie inside the image")

    def distort(self, xn: float, yn: float) -> tuple[float, float]:
        """Apply the radial model to normalized coordinates."""
        r2 = xn * xn + yn * yn
        f = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
        return xn * f, yn * f

    def undistort(self, xd: float, yd: float) -> tuple[float, float]:
        """Invert the radial model by fixed-point iteration.

        Runs at most ``UNDISTORT_MAX_ITERS`` rounds and stops once the
        update is below ``UNDISTORT_TOL`` in normalized units. With zero
        distortion coefficients this is exact on the first pass.
        """
        if self.k1 == 0.0 and self.k2 == 0.0:
            return xd, yd
        xn, yn = xd, yd
        for _ in range(UNDISTORT_MAX_ITERS):
            r2 = xn * xn + yn * yn
            f = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
            xn_new, yn_new = xd / f, yd / f
            if abs(xn_new - xn) < UNDISTORT_TOL and abs(yn_new - yn) < UNDISTORT_TOL:
                return xn_new, yn_new
            xn, yn = xn_new, yn_new
        return xn, yn

    def pixel_from_normalized(self, xd: float, yd: float) -> np.ndarray:
        u = self.fx * xd + self.skew * yd + self.cx
        v = self.fy * yd + self.cy
        return np.array([u, v])

    def normalized_from_pixel(self, u: float, v: float) -> tuple[float, float]:
        yd = (v - self.cy) / self.fy
        xd = (u - self.cx - self.skew * yd) / self.fx
        return xd, yd

    def project_camera_point(self, p_cam) -> np.ndarray:
        """Project a point given in this camera's frame to a pixel."""
        p = np.asarray(p_cam, dtype=float)
        if p[2] <= MIN_DEPTH_M:
            raise NonPositiveDepth(f"depth {p[2]!r} m is at or behind the camera")
        xd, yd = self.distort(p[0] / p[2], p[1] / p[2])
        return self.pixel_from_normalized(xd, yd)

    def contains_pixel(self, px) -> bool:
        u, v = float(px[0]), float(px[1])
        return 0.0 <= u < self.image_width and 0.0 <= v < self.image_height


@dataclass(frozen=True)
class RigidTransform:
    """Rotation followed by translation; ``apply`` maps p -> R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", _as_rotation(self.rotation, "rigid transform"))
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.isfinite(t).all():
            raise ValueError("translation must be finite")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``inner`` first, then ``self``."""
        return RigidTransform(self.rotation @ inner.rotation,
                              self.rotation @ inner.translation + self.translation)


@dataclass(frozen=True)
class StereoRig:
    """Two calibrated cameras with a known relative pose.

    ``rotation`` and ``translation`` take camera-1 coordinates to
    camera-2 coordinates. ``world_transform``, when present, maps
    camera-1 coordinates to the room-aligned world frame.
    """

    camera1: CameraModel
    camera2: CameraModel
    rotation: np.ndarray
    translation: np.ndarray
    world_transform: RigidTransform | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", _as_rotation(self.rotation, "stereo rig"))
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.isfinite(t).all() or float(np.linalg.norm(t)) == 0.0:
            raise ValueError("baseline translation must be finite and non-zero")
        object.__setattr__(self, "translation", t)

    def camera_poses(self) -> tuple[RigidTransform, RigidTransform]:
        """World->camera transforms for both cameras."""
        cam1_from_world = (self.world_transform.inverse()
                           if self.world_transform is not None
                           else RigidTransform.identity())
        cam2_from_cam1 = RigidTransform(self.rotation, self.translation)
        return cam1_from_world, cam2_from_cam1.compose(cam1_from_world)


def project_point(cam: CameraModel, pose: RigidTransform, p) -> np.ndarray:
    """Project a world point through ``pose`` (world->camera) into pixels.

    Raises:
        NonPositiveDepth: if the point is not strictly in front of the camera.
    """
    return cam.project_camera_point(pose.apply(p))


def reprojection_error(rig: StereoRig, p, px1, px2) -> float:
    """RMS pixel distance between the projections of ``p`` and the observations.

    ``p`` is expressed in the rig's world frame. The value is
    ``sqrt((e1^2 + e2^2) / 2)`` over the two per-view Euclidean errors.
    """
    pose1, pose2 = rig.camera_poses()
    e1 = float(np.linalg.norm(project_point(rig.camera1, pose1, p) - np.asarray(px1, dtype=float)))
    e2 = float(np.linalg.norm(project_point(rig.camera2, pose2, p) - np.asarray(px2, dtype=float)))
    return math.sqrt((e1 * e1 + e2 * e2) / 2.0)


def triangulate(rig: StereoRig, px1, px2) -> tuple[np.ndarray, float]:
    """Recover the 3D point observed at ``px1``/``px2`` plus its residual.

    Pixels are undistorted first, then the point is solved as the
    least-squares (DLT) solution of the four projection constraints in
    normalized image coordinates. Returns the point in the rig's world
    frame and the RMS reprojection residual in pixels over both views.

    Raises:
        DegenerateRays: viewing rays within ``MIN_RAY_ANGLE_DEG`` of parallel.
        BehindCamera: solution has non-positive depth in either camera.
    """
    n1 = rig.camera1.undistort(*rig.camera1.normalized_from_pixel(float(px1[0]), float(px1[1])))
    n2 = rig.camera2.undistort(*rig.camera2.normalized_from_pixel(float(px2[0]), float(px2[1])))

    # Ray directions in the camera-1 frame.
    d1 = np.array([n1[0], n1[1], 1.0])
    d2 = rig.rotation.T @ np.array([n2[0], n2[1], 1.0])
    cosang = float(d1 @ d2 / (np.linalg.norm(d1) * np.linalg.norm(d2)))
    angle = math.degrees(math.acos(min(1.0, max(-1.0, cosang))))
    if angle < MIN_RAY_ANGLE_DEG:
        raise DegenerateRays(f"ray angle {angle:.4f} deg below {MIN_RAY_ANGLE_DEG} deg")

    # DLT in normalized coordinates: P1 = [I|0], P2 = [R|t].
    p1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    p2 = np.hstack([rig.rotation, rig.translation.reshape(3, 1)])
    a = np.array([
        n1[0] * p1[2] - p1[0],
        n1[1] * p1[2] - p1[1],
        n2[0] * p2[2] - p2[0],
        n2[1] * p2[2] - p2[1],
    ])
    _, _, vt = np.linalg.svd(a)
    xh = vt[-1]
    if abs(xh[3]) < 1e-12 * np.linalg.norm(xh[:3]):
        raise DegenerateRays("triangulated point at infinity")
    x_cam1 = xh[:3] / xh[3]

    z1 = x_cam1[2]
    z2 = (rig.rotation @ x_cam1 + rig.translation)[2]
    if z1 <= 0 or z2 <= 0:
        raise BehindCamera(f"depths ({z1:.4f}, {z2:.4f}) m not both positive")

    cam2_pose = RigidTransform(rig.rotation, rig.translation)
    e1 = float(np.linalg.norm(rig.camera1.project_camera_point(x_cam1) - np.asarray(px1, dtype=float)))
    e2 = float(np.linalg.norm(project_point(rig.camera2, cam2_pose, x_cam1) - np.asarray(px2, dtype=float)))
    residual = math.sqrt((e1 * e1 + e2 * e2) / 2.0)

    if rig.world_transform is not None:
        x_cam1 = rig.world_transform.apply(x_cam1)
    return x_cam1, residual


# --- rig file I/O ---

def _camera_from_dict(d: dict) -> CameraModel:
    return CameraModel(
        fx=float(d["fx"]), fy=float(d["fy"]),
        cx=float(d["cx"]), cy=float(d["cy"]),
        image_width=int(d["width"]), image_height=int(d["height"]),
        skew=float(d.get("skew", 0.0)),
        k1=float(d.get("k1", 0.0)), k2=float(d.get("k2", 0.0)),
    )


def _camera_to_dict(cam: CameraModel) -> dict:
    return {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "skew": cam.skew, "k1": cam.k1, "k2": cam.k2,
            "width": cam.image_width, "height": cam.image_height}


def rig_from_dict(d: dict) -> StereoRig:
    wt = None
    if d.get("world_transform") is not None:
        w = d["world_transform"]
        wt = RigidTransform(np.asarray(w["rotation"], dtype=float).reshape(3, 3),
                            np.asarray(w["translation_m"], dtype=float))
    return StereoRig(
        camera1=_camera_from_dict(d["camera1"]),
        camera2=_camera_from_dict(d["camera2"]),
        rotation=np.asarray(d["rotation"], dtype=float).reshape(3, 3),
        translation=np.asarray(d["translation_m"], dtype=float),
        world_transform=wt,
    )


def rig_to_dict(rig: StereoRig) -> dict:
    d = {
        "camera1": _camera_to_dict(rig.camera1),
        "camera2": _camera_to_dict(rig.camera2),
        "rotation": [float(v) for v in rig.rotation.ravel()],
        "translation_m": [float(v) for v in rig.translation],
    }
    if rig.world_transform is not None:
        d["world_transform"] = {
            "rotation": [float(v) for v in rig.world_transform.rotation.ravel()],
            "translation_m": [float(v) for v in rig.world_transform.translation],
        }
    return d


def load_rig(path) -> StereoRig:
    """Load a rig description from a JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        return rig_from_dict(json.load(f))


def save_rig(rig: StereoRig, path) -> None:
    Path(path).write_text(json.dumps(rig_to_dict(rig), indent=2, sort_keys=True), encoding="utf-8")


def _yaw(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def make_converging_rig(baseline_m: float = 1.778,
                        convergence_deg: float = 45.0,
                        camera: CameraModel | None = None,
                        room_frame: bool = True) -> StereoRig:
    """Build a symmetric two-camera rig toed in toward a common scene.

    The cameras sit ``baseline_m`` apart on the x axis of a staging
    frame, each yawed inward by half of ``convergence_deg`` so their
    optical axes converge in front of the rig. With ``room_frame`` the
    rig carries a world transform back to that staging frame, so
    triangulated points land in the same coordinates the scene was
    described in; otherwise the camera-1 frame is the world frame.
    """
    if camera is None:
        camera = CameraModel(fx=1400.0, fy=1400.0, cx=960.0, cy=540.0,
                             image_width=1920, image_height=1080)
    half = convergence_deg / 2.0
    c1 = np.array([-baseline_m / 2.0, 0.0, 0.0])
    c2 = np.array([baseline_m / 2.0, 0.0, 0.0])
    r1 = _yaw(-half)   # world->cam1: x_c = R (X - C)
    r2 = _yaw(half)
    rel_rot = r2 @ r1.T
    rel_t = r2 @ (c1 - c2)
    wt = RigidTransform(r1.T, c1) if room_frame else None  # cam1 -> staging frame
    return StereoRig(camera1=camera, camera2=camera,
                     rotation=rel_rot, translation=rel_t, world_transform=wt)
