"""Shared fixtures: test rigs and reference-table loaders."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from perchflight import CameraModel, StereoRig, make_converging_rig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def axis_rig() -> StereoRig:
    """Axis-aligned rig: camera 2 displaced 0.1 m along +x, no rotation."""
    cam = CameraModel(fx=1000.0, fy=1000.0, cx=960.0, cy=540.0,
                      image_width=1920, image_height=1080)
    return StereoRig(camera1=cam, camera2=cam,
                     rotation=np.eye(3), translation=np.array([-0.1, 0.0, 0.0]))


@pytest.fixture
def room_rig() -> StereoRig:
    """Converging rig with a room-frame world transform."""
    return make_converging_rig()


def load_reference_clip_rows() -> list[dict]:
    """Per-clip velocity/acceleration reference rows, exactly as published."""
    with open(DATA_DIR / "reference_clip_metrics.csv", newline="") as f:
        return list(csv.DictReader(f))


def load_reference_speed_rows() -> list[dict]:
    """Per-clip flying/landing speed reference rows (duplicates included)."""
    with open(DATA_DIR / "reference_speed_rows.csv", newline="") as f:
        return list(csv.DictReader(f))
