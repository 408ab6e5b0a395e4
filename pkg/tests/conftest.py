"""Shared builders for the test suite."""

import sys

import numpy as np
import pytest

from mvscale.geometry import Camera, Intrinsics, Pose
from mvscale.synth import DatasetConfig, build_scene_data


def square_intrinsics(size: int) -> Intrinsics:
    return Intrinsics(fx=float(size), fy=float(size), cx=size / 2.0,
                      cy=size / 2.0, width=size, height=size)


def identity_camera(size: int) -> Camera:
    return Camera(square_intrinsics(size), Pose.identity())


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@pytest.fixture(scope="session")
def small_view():
    """One 64 px scene plus its trajectory cameras; treat as read-only."""
    cfg = DatasetConfig(scenes=1, image_size=64, seed=21, traj_steps=6)
    return build_scene_data(cfg, 0)


@pytest.fixture(scope="session")
def small_views():
    """Three 64 px scenes for protocol-level tests; treat as read-only."""
    cfg = DatasetConfig(scenes=3, image_size=64, seed=33, traj_steps=8)
    return [build_scene_data(cfg, i) for i in range(cfg.scenes)]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion with the measured values."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", []) if mod else []
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(results):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:02d} {name}: {status} ({detail})")
