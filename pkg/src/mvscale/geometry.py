"""Two-view pinhole geometry: cameras, relative poses, epipolar algebra.

Conventions (used everywhere in this package):
  * poses are world-to-camera, ``x_cam = R @ x_world + t``
  * pixel coordinates are ``(x, y)`` with x along image width
  * homogeneous pixels are lifted by appending 1
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

Z_MIN = 1e-6  # behind-camera cutoff for projections


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise DataError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise DataError(f"image size must be >= 1, got {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def matrix_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True, eq=False)
class Pose:
    """World-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise DataError("pose contains non-finite entries")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise DataError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise DataError("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, mat: np.ndarray, orthonormalize: bool = False) -> "Pose":
        """Build from a 3x4 [R|t] matrix, optionally projecting R to SO(3)."""
        mat = np.asarray(mat, dtype=float).reshape(3, 4)
        R, t = mat[:, :3], mat[:, 3]
        if orthonormalize:
            u, _, vt = np.linalg.svd(R)
            R = u @ vt
            if np.linalg.det(R) < 0:
                R = u @ np.diag([1.0, 1.0, -1.0]) @ vt
        return cls(R, t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, C = -R^T t."""
        return -self.rotation.T @ self.translation

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform world points (..., 3) into camera coordinates."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class Camera:
    intrinsics: Intrinsics
    pose: Pose


@dataclass(frozen=True, eq=False)
class PixelMatch:
    """A pixel correspondence between two images."""

    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.p1, dtype=float).reshape(2)
        p2 = np.asarray(self.p2, dtype=float).reshape(2)
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            raise DataError("match coordinates must be finite")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)


def relative_pose(a: Pose, b: Pose) -> Pose:
    """Pose mapping camera-a coordinates into camera-b coordinates."""
    r_rel = b.rotation @ a.rotation.T
    t_rel = b.translation - r_rel @ a.translation
    return Pose(r_rel, t_rel)


def compose(rel: Pose, base: Pose) -> Pose:
    """Pose of the camera reached by applying ``rel`` after ``base``."""
    return Pose(rel.rotation @ base.rotation, rel.rotation @ base.translation + rel.translation)


def scale_translation(cam: Camera, s: float) -> Camera:
    """Scale the camera translation, leaving rotation and intrinsics untouched."""
    if not (s > 0):
        raise ConfigError(f"translation scale must be positive, got {s}")
    pose = Pose(cam.pose.rotation, cam.pose.translation * float(s))
    return Camera(cam.intrinsics, pose)


def project(point: np.ndarray, cam: Camera, z_min: float = Z_MIN) -> np.ndarray | None:
    """Project one world point to pixels; None when at or behind the near plane."""
    xc = cam.pose.apply(np.asarray(point, dtype=float).reshape(3))
    if xc[2] <= z_min:
        return None
    k = cam.intrinsics
    return np.array([k.fx * xc[0] / xc[2] + k.cx, k.fy * xc[1] / xc[2] + k.cy])


def project_points(points: np.ndarray, cam: Camera, z_min: float = Z_MIN):
    """Vectorized projection of (N, 3) world points.

    Returns (pixels (N, 2), depths (N,), in_front (N,) bool). Pixel rows for
    points behind the near plane are filled with NaN.
    """
    xc = cam.pose.apply(points)
    z = xc[:, 2]
    ok = z > z_min
    k = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.where(ok, k.fx * xc[:, 0] / z + k.cx, np.nan)
        py = np.where(ok, k.fy * xc[:, 1] / z + k.cy, np.nan)
    return np.stack([px, py], axis=-1), z, ok


def essential_matrix(rel: Pose) -> np.ndarray:
    """E = [t]_x R for the relative pose between two views."""
    t = rel.translation
    tx = np.array(
        [[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]]
    )
    return tx @ rel.rotation


def fundamental_matrix(e: np.ndarray, k1: Intrinsics, k2: Intrinsics) -> np.ndarray:
    """Pixel-space fundamental matrix F = K2^-T E K1^-1."""
    return k2.matrix_inv.T @ np.asarray(e, dtype=float) @ k1.matrix_inv


def _point_line_distance(p: np.ndarray, line: np.ndarray) -> float:
    norm = np.hypot(line[0], line[1])
    if norm == 0.0:
        return np.inf
    return abs(line[0] * p[0] + line[1] * p[1] + line[2]) / norm


def symmetric_epipolar_distance(
    f: np.ndarray, m: PixelMatch, aggregate: str = "mean"
) -> float:
    """Symmetric epipolar distance of a match under F, in pixels.

    ``aggregate`` combines the two directional point-to-line distances:
    "mean" (default), "max", or "sum". A degenerate epipolar line (both
    direction coefficients zero) yields +inf.
    """
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        raise DataError("fundamental matrix is all zeros")
    p1h = np.array([m.p1[0], m.p1[1], 1.0])
    p2h = np.array([m.p2[0], m.p2[1], 1.0])
    d2 = _point_line_distance(m.p2, f @ p1h)
    d1 = _point_line_distance(m.p1, f.T @ p2h)
    if aggregate == "mean":
        return 0.5 * (d1 + d2)
    if aggregate == "max":
        return max(d1, d2)
    if aggregate == "sum":
        return d1 + d2
    raise ConfigError(f"unknown SED aggregate {aggregate!r}")
