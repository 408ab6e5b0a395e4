"""Reference-scale calibration from paired sparse/monocular depths.

Each scene pools (sparse SfM depth, monocular depth) pairs across its
views into one scale-only least-squares fit. Scenes are ranked by
normalized residual variance; the worst fraction is either trimmed or
falls back to scale 1.0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class DepthPairSample:
    sparse_depth: float
    mono_depth: float

    def __post_init__(self):
        ok = (
            math.isfinite(self.sparse_depth)
            and math.isfinite(self.mono_depth)
            and self.sparse_depth > 0
            and self.mono_depth > 0
        )
        if not ok:
            raise DataError(
                f"depth pair must be positive and finite, got "
                f"({self.sparse_depth}, {self.mono_depth})"
            )


@dataclass(frozen=True)
class SceneCalibration:
    scene_id: str
    alpha: float
    residual_variance: float
    sample_count: int
    reliable: bool | None = None  # set by reliability_partition


@dataclass(frozen=True)
class CalibrationPolicy:
    mode: str = "fallback_one"  # or "trim"
    unreliable_fraction: float = 0.30

    def __post_init__(self):
        if self.mode not in ("trim", "fallback_one"):
            raise ConfigError(f"unknown policy mode {self.mode!r}")
        if not (0.0 < self.unreliable_fraction < 1.0):
            raise ConfigError(
                f"unreliable_fraction must lie in (0,1), got {self.unreliable_fraction}"
            )


def fit_scene_scale(samples, scene_id: str = "", log_space: bool = False) -> SceneCalibration:
    """Scale-only least squares: alpha = sum(mono*sparse) / sum(sparse^2).

    residual_variance is the mean squared residual divided by mean(mono)^2,
    making the ranking insensitive to absolute depth magnitude. log_space
    fits alpha as exp(mean(log mono - log sparse)) instead.
    """
    samples = list(samples)
    if not samples:
        raise DataError("no depth pair samples")
    sparse = np.array([s.sparse_depth for s in samples])
    mono = np.array([s.mono_depth for s in samples])
    denom = float(np.sum(sparse * sparse))
    if denom <= 0:
        raise DataError("sum of squared sparse depths is zero")
    if log_space:
        alpha = float(np.exp(np.mean(np.log(mono) - np.log(sparse))))
    else:
        alpha = float(np.sum(mono * sparse) / denom)
    resid = alpha * sparse - mono
    variance = float(np.mean(resid * resid) / np.mean(mono) ** 2)
    return SceneCalibration(
        scene_id=scene_id,
        alpha=alpha,
        residual_variance=variance,
        sample_count=len(samples),
    )


def reliability_partition(calibs, fraction: float = 0.30):
    """Flag the ceil(fraction*N) highest-variance scenes as unreliable.

    Ties on variance are broken by scene id, greater ids flagged first, so
    the result is a deterministic function of the input set. Returns new
    records sorted by scene id.
    """
    calibs = list(calibs)
    if not calibs:
        raise DataError("no calibrations to partition")
    if not (0.0 < fraction < 1.0):
        raise ConfigError(f"fraction must lie in (0,1), got {fraction}")
    n_bad = math.ceil(fraction * len(calibs))
    by_rank = sorted(calibs, key=lambda c: (c.residual_variance, c.scene_id))
    bad_ids = {c.scene_id for c in by_rank[len(calibs) - n_bad :]}
    return [
        replace(c, reliable=c.scene_id not in bad_ids)
        for c in sorted(calibs, key=lambda c: c.scene_id)
    ]


def apply_policy(calibs, policy: CalibrationPolicy):
    """Map scenes to reference scales per policy.

    fallback_one keeps every scene, setting unreliable ones to exactly 1.0;
    trim drops unreliable scenes entirely. Returns (id -> scale, retained
    id set).
    """
    calibs = list(calibs)
    if any(c.reliable is None for c in calibs):
        raise DataError("reliability flags not set; run reliability_partition first")
    scales = {}
    retained = set()
    for c in calibs:
        if c.reliable:
            scales[c.scene_id] = c.alpha
            retained.add(c.scene_id)
        elif policy.mode == "fallback_one":
            scales[c.scene_id] = 1.0
            retained.add(c.scene_id)
    return scales, retained


def read_depth_pairs_csv(path_or_text) -> list:
    """Parse (view_id, sparse_depth, mono_depth) CSV rows; header optional."""
    if isinstance(path_or_text, (str, Path)) and "\n" not in str(path_or_text):
        text = Path(path_or_text).read_text()
    else:
        text = str(path_or_text)
    samples = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 CSV fields, got {len(row)}")
        if lineno == 1 and not _is_number(row[1]):
            continue  # header row
        try:
            samples.append(
                DepthPairSample(sparse_depth=float(row[1]), mono_depth=float(row[2]))
            )
        except ValueError as exc:
            raise DataError(f"line {lineno}: unparseable depth ({exc})") from None
    if not samples:
        raise DataError("no depth pair rows found")
    return samples


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
