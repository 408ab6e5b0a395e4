"""Experiment drivers: SFC sweeps, SS-TSED runs, scale-recovery problems.

These bind the metric primitives to the synthetic generator simulation and
handle the bookkeeping the batch commands need: pose selection by target
translation magnitude, counter-based sample indexing, and thread-pool fanout
with id-ordered aggregation so worker count never changes a result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .flow_metrics import MaskConfig, SfcResult, edge_heatmap, sfc_pipeline
from .synth import (
    GeneratorSim,
    PhotometricProblem,
    correspondences,
    draw_sample_scale,
    front_depth,
    gt_flow,
    pixel_grid,
    scaled_camera,
    simulate_gnvs_sample,
)
from .tsed import TsedConfig, ss_tsed_protocol

# sample-index stride between magnitudes, so every (magnitude, sample) pair
# gets its own slot in the per-scene counter stream
MAGNITUDE_STRIDE = 10000


@dataclass(frozen=True)
class ProtocolConfig:
    """Shared evaluation-protocol knobs."""

    magnitudes: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
    images_per_eval: int = 200
    samples_per_view: int = 10
    pairs_per_image: int = 100
    seed: int = 0

    def __post_init__(self):
        mags = tuple(float(m) for m in self.magnitudes)
        object.__setattr__(self, "magnitudes", mags)
        if not mags:
            raise ConfigError("need at least one translation magnitude")
        if any(m <= 0 for m in mags):
            raise ConfigError(f"magnitudes must be positive, got {mags}")
        if any(b <= a for a, b in zip(mags, mags[1:])):
            raise ConfigError(f"magnitudes must be strictly ascending, got {mags}")
        for name in ("images_per_eval", "samples_per_view", "pairs_per_image"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")


def nearest_pose_index(cond, targets, magnitude: float) -> int:
    """Index of the target whose translation distance from cond is closest
    to magnitude; ties go to the earlier frame."""
    if not targets:
        raise DataError("no target poses to select from")
    origin = cond.pose.center
    dists = [float(np.linalg.norm(t.pose.center - origin)) for t in targets]
    best = 0
    for i, d in enumerate(dists):
        if abs(d - magnitude) < abs(dists[best] - magnitude):
            best = i
    return best


def sfc_eval(scene, cond, target, gen: GeneratorSim, n: int,
             sample_offset: int = 0, cfg: MaskConfig = MaskConfig(),
             use_gt_mask: bool = True, front_cond=None) -> SfcResult:
    """SFC over n generated samples of one target view.

    Samples are the generator's scale draws applied to the target's relative
    motion; flows are exact. With use_gt_mask the support is the cycle mask
    of the noiseless pair (available here because the simulator knows the
    scene); otherwise the per-sample consensus mask is used.
    """
    if n < 2:
        raise DataError(f"need >= 2 samples for a deviation, got {n}")
    k = cond.intrinsics
    grid = pixel_grid(k.width, k.height)
    if front_cond is None:
        front_cond = front_depth(scene, cond, grid)
    pairs = []
    for i in range(n):
        _, s, fwd, bwd = _sample_flows(scene, cond, target, gen,
                                       sample_offset + i, front_cond)
        pairs.append((fwd, bwd))
    gt_pair = None
    if use_gt_mask:
        fwd_nom, _ = gt_flow(scene, cond, target, front_a=front_cond)
        bwd_nom, _ = gt_flow(scene, target, cond)
        gt_pair = (fwd_nom, bwd_nom)
    return sfc_pipeline(pairs, gt_flow_pair=gt_pair, cfg=cfg)


def _sample_flows(scene, cond, target, gen, index, front_cond):
    """Flow-only twin of simulate_gnvs_sample; skips the image render."""
    s = draw_sample_scale(gen, scene.scene_id, index)
    cam = scaled_camera(cond, target, s)
    fwd, _ = gt_flow(scene, cond, cam, front_a=front_cond)
    bwd, _ = gt_flow(scene, cam, cond)
    return cam, s, fwd, bwd


@dataclass(frozen=True, eq=False)
class SfcRow:
    scene_id: str
    magnitude: float
    target_index: int
    result: SfcResult


def sfc_protocol(views, gen: GeneratorSim, proto: ProtocolConfig,
                 cfg: MaskConfig = MaskConfig(), use_gt_mask: bool = True,
                 threads: int = 1):
    """SFC for every (scene, magnitude): rows ordered by (scene, magnitude).

    views: list of SceneData (scene, cond, targets). For each magnitude the
    trajectory pose with the nearest translation distance is evaluated with
    samples_per_view generator draws.
    """
    views = list(views)[: proto.images_per_eval]
    if not views:
        raise DataError("no scenes to evaluate")
    caches = [front_depth(v.scene, v.cond, pixel_grid(
        v.cond.intrinsics.width, v.cond.intrinsics.height)) for v in views]
    jobs = []
    for vi, view in enumerate(views):
        for mi, mag in enumerate(proto.magnitudes):
            jobs.append((vi, mi, mag))

    def run_job(job):
        vi, mi, mag = job
        view = views[vi]
        ti = nearest_pose_index(view.cond, view.targets, mag)
        result = sfc_eval(
            view.scene, view.cond, view.targets[ti], gen,
            proto.samples_per_view, sample_offset=mi * MAGNITUDE_STRIDE,
            cfg=cfg, use_gt_mask=use_gt_mask, front_cond=caches[vi],
        )
        return SfcRow(view.scene.scene_id, mag, ti, result)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_job, jobs))
    return [run_job(j) for j in jobs]


def mean_sfc_by_magnitude(rows) -> dict:
    """magnitude -> mean SFC over scenes."""
    acc = {}
    for row in rows:
        acc.setdefault(row.magnitude, []).append(row.result.sfc)
    return {m: float(np.mean(v)) for m, v in sorted(acc.items())}


def mean_sfc(rows) -> float:
    """Grand mean over every (scene, magnitude) row."""
    return float(np.mean([row.result.sfc for row in rows]))


def synthetic_match_sampler(gen: GeneratorSim, matches_per_pair: int):
    """SS-TSED sampler: draw an independent scale for each of the two views,
    then sample exact correspondences between the two *generated* views."""

    def sampler(scene, cond, nom_a, nom_b, rng):
        s_a = float(np.exp(gen.scale_noise_sigma * rng.standard_normal()))
        s_b = float(np.exp(gen.scale_noise_sigma * rng.standard_normal()))
        cam_a = scaled_camera(cond, nom_a, s_a)
        cam_b = scaled_camera(cond, nom_b, s_b)
        return correspondences(scene, cam_a, cam_b, matches_per_pair, rng)

    return sampler


def run_ss_tsed(views, gen: GeneratorSim, cfg: TsedConfig,
                proto: ProtocolConfig, threads: int = 1):
    """SS-TSED curve over the synthetic views with the simulated generator."""
    views = list(views)[: proto.images_per_eval]
    if not views:
        raise DataError("no scenes to evaluate")
    scenes = [(v.scene, v.cond) for v in views]
    sampler = synthetic_match_sampler(gen, cfg.matches_per_pair)
    return ss_tsed_protocol(scenes, sampler, cfg, proto.pairs_per_image,
                            rng_seed=proto.seed, threads=threads)


def recovery_problems(views, magnitudes=(0.05, 0.1, 0.15),
                      max_pixels: int | None = 192, seed: int = 0,
                      threads: int = 1):
    """Photometric problems for scale learning, one per scene.

    Pools support from the trajectory poses nearest each magnitude
    (duplicates dropped). Returns (problems, planted scales by id).

    Default magnitudes are small on purpose: the pixel offset at a wrong
    scale grows with the translation, and it has to stay inside the
    texture's coarse basin for descent from s = 1 to reach the planted
    scale instead of a ripple minimum.
    """
    views = list(views)

    def build(job):
        vi, view = job
        picked = []
        for m in magnitudes:
            ti = nearest_pose_index(view.cond, view.targets, m)
            if ti not in picked:
                picked.append(ti)
        targets = [view.targets[ti] for ti in picked]
        rng = np.random.default_rng(np.random.SeedSequence((seed, 0x9B1D, vi)))
        return PhotometricProblem(view.scene, view.cond, targets,
                                  max_pixels=max_pixels, rng=rng)

    jobs = list(enumerate(views))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            problems = list(pool.map(build, jobs))
    else:
        problems = [build(j) for j in jobs]
    truth = {v.scene.scene_id: v.scene.planted_scale for v in views}
    return problems, truth


def sample_heatmap(scene, cond, target, gen: GeneratorSim, n: int,
                   sample_offset: int = 0) -> np.ndarray:
    """Average edge-response map over n generated samples of one view."""
    if n < 1:
        raise DataError(f"need >= 1 sample, got {n}")
    images = []
    for i in range(n):
        out, _, _, _ = simulate_gnvs_sample(scene, cond, target, gen,
                                            sample_offset + i)
        images.append(out.image)
    return edge_heatmap(images)
