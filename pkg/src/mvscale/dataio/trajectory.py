"""Camera trajectory text files.

Format (one file per video clip, as distributed with RealEstate10K-style
datasets): the first line is an opaque source string, every following
non-empty line holds 19 whitespace-separated numbers:

    timestamp_us  fx fy cx cy  r0 r1  p00 p01 p02 p03 p10 ... p23

where fx..cy are intrinsics normalized by image width/height, r0 r1 are
reserved (zero in the wild), and the twelve p values are the row-major
3x4 world-to-camera matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..geometry import Camera, Intrinsics, Pose

_FIELDS_PER_LINE = 19
_ROT_TOL = 1e-3  # estimated poses in the wild are only this orthonormal


@dataclass(frozen=True, eq=False)
class TrajectoryFrame:
    timestamp_us: int
    fx: float
    fy: float
    cx: float
    cy: float
    reserved: tuple
    pose_matrix: np.ndarray  # 3x4 world-to-camera, row-major

    def intrinsics(self, width: int, height: int) -> Intrinsics:
        """Denormalize intrinsics for a concrete image size."""
        return Intrinsics(
            fx=self.fx * width,
            fy=self.fy * height,
            cx=self.cx * width,
            cy=self.cy * height,
            width=width,
            height=height,
        )

    def pose(self) -> Pose:
        # estimated rotations are orthonormal only to ~1e-3; project to SO(3)
        return Pose.from_matrix(self.pose_matrix, orthonormalize=True)

    def camera(self, width: int, height: int) -> Camera:
        return Camera(self.intrinsics(width, height), self.pose())


@dataclass(frozen=True, eq=False)
class TrajectoryFile:
    source: str
    frames: tuple

    def __post_init__(self):
        if len(self.frames) < 1:
            raise DataError("trajectory has no frames")


def _parse_line(line: str, lineno: int) -> TrajectoryFrame:
    fields = line.split()
    if len(fields) != _FIELDS_PER_LINE:
        raise DataError(
            f"line {lineno}: expected {_FIELDS_PER_LINE} fields, got {len(fields)}"
        )
    try:
        timestamp = int(fields[0])
        values = [float(v) for v in fields[1:]]
    except ValueError as exc:
        raise DataError(f"line {lineno}: unparseable number ({exc})") from None
    pose = np.array(values[6:], dtype=float).reshape(3, 4)
    rot = pose[:, :3]
    if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ROT_TOL:
        raise DataError(f"line {lineno}: rotation not orthonormal within {_ROT_TOL}")
    return TrajectoryFrame(
        timestamp_us=timestamp,
        fx=values[0],
        fy=values[1],
        cx=values[2],
        cy=values[3],
        reserved=(values[4], values[5]),
        pose_matrix=pose,
    )


def parse_trajectory(text: str) -> TrajectoryFile:
    """Parse trajectory text; tolerates CRLF endings and trailing blank lines."""
    lines = text.replace("\r\n", "\n").split("\n")
    if not lines:
        raise DataError("empty trajectory file")
    source = lines[0].strip()
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        frames.append(_parse_line(line, lineno))
    if not frames:
        raise DataError("trajectory has no frames")
    for prev, cur in zip(frames, frames[1:]):
        if cur.timestamp_us <= prev.timestamp_us:
            raise DataError(
                f"timestamps not strictly increasing: {prev.timestamp_us} then {cur.timestamp_us}"
            )
    return TrajectoryFile(source=source, frames=tuple(frames))


def _fmt(x: float) -> str:
    return "%.17g" % x


def serialize_trajectory(traj: TrajectoryFile) -> str:
    """Inverse of parse_trajectory; floats keep 17 significant digits."""
    out = [traj.source]
    for fr in traj.frames:
        vals = [str(fr.timestamp_us)]
        vals += [_fmt(v) for v in (fr.fx, fr.fy, fr.cx, fr.cy)]
        vals += [_fmt(v) for v in fr.reserved]
        vals += [_fmt(v) for v in fr.pose_matrix.reshape(-1)]
        out.append(" ".join(vals))
    return "\n".join(out) + "\n"
