"""Scale sensitivity via TSED between independently generated views.

Two views are generated from one conditioning image along different
translation axes; each samples its own scene scale. The fundamental
matrix of the *nominal* camera pair then scores their agreement: a
common scale factor leaves the epipolar geometry intact, while
mismatched scales bend the relative translation direction and raise
the symmetric epipolar distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, DataError
from .geometry import (
    Camera,
    Pose,
    essential_matrix,
    fundamental_matrix,
    relative_pose,
    symmetric_epipolar_distance,
)

AXES = {"x": 0, "y": 1, "z": 2}
AXIS_PAIRS = ("xy", "xz", "yz")


def _default_sweep():
    return tuple(np.linspace(0.7, 1.0, 14))


@dataclass(frozen=True)
class TsedConfig:
    t_matches: int = 10
    t_error_sweep: tuple = field(default_factory=_default_sweep)
    translation_magnitude: float = 0.2
    matches_per_pair: int = 200

    def __post_init__(self):
        if self.t_matches < 1:
            raise ConfigError(f"t_matches must be >= 1, got {self.t_matches}")
        sweep = tuple(float(t) for t in self.t_error_sweep)
        if not sweep or any(t <= 0 for t in sweep):
            raise ConfigError("threshold sweep must be positive and non-empty")
        if any(b <= a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("threshold sweep must be strictly ascending")
        if not (self.translation_magnitude > 0):
            raise ConfigError(
                f"translation magnitude must be positive, got {self.translation_magnitude}"
            )
        object.__setattr__(self, "t_error_sweep", sweep)


@dataclass(frozen=True, eq=False)
class PairVerdict:
    axis_pair: str
    median_sed: float
    match_count: int
    consistent_at: tuple  # bool per sweep threshold


@dataclass(frozen=True, eq=False)
class SsTsedCurve:
    sweep: tuple
    pct_overall: np.ndarray
    pct_by_axis: dict  # axis pair -> array over sweep
    pair_count: int
    skip_count: int


def tsed_pair(matches, f: np.ndarray, cfg: TsedConfig, axis_pair: str = "") -> PairVerdict:
    """Median-SED verdict for one generated-view pair under nominal F.

    Too few matches is a legitimate negative outcome, not an error: the
    pair is simply inconsistent at every threshold.
    """
    seds = np.array([symmetric_epipolar_distance(f, m) for m in matches])
    count = len(seds)
    median = float(np.median(seds)) if count else float("inf")
    verdicts = tuple(
        bool(count >= cfg.t_matches and median < thr) for thr in cfg.t_error_sweep
    )
    return PairVerdict(
        axis_pair=axis_pair, median_sed=median, match_count=count, consistent_at=verdicts
    )


def axis_translation_cameras(cond: Camera, axes, magnitude: float,
                             rng: np.random.Generator):
    """Two copies of cond displaced along two distinct world axes.

    Each camera's center moves by +-magnitude along its axis, sign drawn
    from rng; rotations are untouched. Same-axis pairs are rejected: a
    shared translation axis keeps the pair's relative translation parallel
    to nominal under any scale mismatch, so the epipolar test degenerates.
    """
    if not (magnitude > 0):
        raise ConfigError(f"magnitude must be positive, got {magnitude}")
    ax = [AXES.get(a) for a in axes]
    if len(ax) != 2 or None in ax:
        raise ConfigError(f"axes must be two of x, y, z, got {tuple(axes)}")
    if ax[0] == ax[1]:
        raise ConfigError("axis pair must use two distinct axes")
    out = []
    for axis in ax:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        center = cond.pose.center.copy()
        center[axis] += sign * magnitude
        pose = Pose(cond.pose.rotation, -cond.pose.rotation @ center)
        out.append(Camera(cond.intrinsics, pose))
    return out[0], out[1]


def nominal_fundamental(cam_a: Camera, cam_b: Camera) -> np.ndarray:
    """F of the requested (unscaled) relative pose between two cameras."""
    rel = relative_pose(cam_a.pose, cam_b.pose)
    return fundamental_matrix(essential_matrix(rel), cam_a.intrinsics, cam_b.intrinsics)


def ss_tsed_protocol(scenes, sampler, cfg: TsedConfig, pairs_per_image: int,
                     rng_seed: int = 0, threads: int = 1) -> SsTsedCurve:
    """Consistency percentages over all (conditioning view, axis pair) draws.

    scenes: list of (scene_object, cond Camera) tuples.
    sampler: callable (scene_object, cond, nominal_a, nominal_b, rng) ->
        list of PixelMatch between the two *generated* views. A DataError
        from the sampler (e.g. no co-visible geometry after an extreme
        scale draw) skips the pair and is tallied.

    F always comes from the nominal cameras: the metric asks whether the
    generated content agrees with the geometry that was requested.
    """
    if pairs_per_image < 1:
        raise ConfigError(f"pairs_per_image must be >= 1, got {pairs_per_image}")
    jobs = []
    for scene_index, (scene, cond) in enumerate(scenes):
        for pair_index in range(pairs_per_image):
            jobs.append((scene_index, scene, cond, pair_index))

    def run_job(job):
        scene_index, scene, cond, pair_index = job
        rng = np.random.default_rng(
            np.random.SeedSequence((rng_seed, scene_index, pair_index))
        )
        axis_pair = AXIS_PAIRS[rng.integers(0, len(AXIS_PAIRS))]
        nom_a, nom_b = axis_translation_cameras(
            cond, axis_pair, cfg.translation_magnitude, rng
        )
        f = nominal_fundamental(nom_a, nom_b)
        try:
            matches = sampler(scene, cond, nom_a, nom_b, rng)
        except DataError:
            return axis_pair, None
        return axis_pair, tsed_pair(matches, f, cfg, axis_pair)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(j) for j in jobs]

    sweep = cfg.t_error_sweep
    totals = {p: 0 for p in AXIS_PAIRS}
    hits = {p: np.zeros(len(sweep)) for p in AXIS_PAIRS}
    skips = 0
    for axis_pair, verdict in results:
        if verdict is None:
            skips += 1
            continue
        totals[axis_pair] += 1
        hits[axis_pair] += np.array(verdict.consistent_at, dtype=float)
    evaluated = sum(totals.values())
    if evaluated == 0:
        raise DataError("every TSED pair was skipped; no usable geometry")
    pct_overall = 100.0 * sum(hits.values()) / evaluated
    pct_by_axis = {
        p: (100.0 * hits[p] / totals[p] if totals[p] else np.full(len(sweep), np.nan))
        for p in AXIS_PAIRS
    }
    return SsTsedCurve(
        sweep=sweep,
        pct_overall=pct_overall,
        pct_by_axis=pct_by_axis,
        pair_count=evaluated,
        skip_count=skips,
    )
