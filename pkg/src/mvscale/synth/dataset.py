"""Dataset directories: generation and loading.

Layout written by generate_dataset (and the `synth gen` command):

    out/
      manifest.json          seed + full generation config
      scales.json            planted per-scene scales; evaluation-only
      scenes/<id>/trajectory.txt
      scenes/<id>/images/cond.png, target-XX.png   (16-bit grayscale)
      scenes/<id>/depths/cond.pfm
      scenes/<id>/flows/tXX-fwd.flo, tXX-bwd.flo

Trajectory poses are the *recorded* cameras (scale-free units, like a
monocular SLAM export); images and flows are rendered at the scene's
planted scale, so the pixels embed a scale the pose file does not know.
Scenes are procedural: loaders rebuild geometry from the manifest seed
instead of deserializing meshes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..dataio import parse_trajectory, write_flow, write_gray_png, write_pfm
from ..dataio.reports import SCHEMA_VERSION
from ..errors import ConfigError, DataError
from ..geometry import Camera
from .render import front_depth, gt_flow, pixel_grid, render, scaled_camera
from .scene import SceneSpec, SyntheticScene, make_scene

TRAJ_STEP = 0.025  # scene units between consecutive trajectory frames


@dataclass(frozen=True)
class DatasetConfig:
    scenes: int = 4
    image_size: int = 128
    seed: int = 0
    traj_steps: int = 12
    min_patches: int = 3
    max_patches: int = 8
    log_scale_low: float = -1.0
    log_scale_high: float = 1.0
    write_images: bool = True
    write_depths: bool = True
    write_flows: bool = True

    def __post_init__(self):
        if self.scenes < 1:
            raise ConfigError(f"need >= 1 scene, got {self.scenes}")
        if self.image_size < 8:
            raise ConfigError(f"image size too small: {self.image_size}")
        if self.traj_steps < 1:
            raise ConfigError(f"need >= 1 trajectory step, got {self.traj_steps}")

    def scene_spec(self) -> SceneSpec:
        return SceneSpec(
            min_patches=self.min_patches,
            max_patches=self.max_patches,
            log_scale_low=self.log_scale_low,
            log_scale_high=self.log_scale_high,
        )


def scene_name(index: int) -> str:
    return f"scene-{index:04d}"


def _scene_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, 0x5CE2E, index)))


def build_scene(cfg: DatasetConfig, index: int):
    """Rebuild scene + trajectory direction for one index; pure in (cfg, index)."""
    rng = _scene_rng(cfg.seed, index)
    scene = make_scene(cfg.scene_spec(), rng, scene_id=scene_name(index))
    phi = rng.uniform(0.0, 2.0 * np.pi)
    zeta = rng.uniform(-0.25, 0.25)
    lat = np.sqrt(1.0 - zeta * zeta)
    direction = np.array([np.cos(phi) * lat, np.sin(phi) * lat, zeta])
    return scene, direction


def trajectory_lines(direction: np.ndarray, steps: int) -> str:
    """Trajectory text: identity conditioning frame plus poses marching
    along one direction at multiples of TRAJ_STEP."""
    rows = ["synthetic://planar-patches"]

    def pose_row(ts: int, center: np.ndarray) -> str:
        t = -center  # world-to-camera with identity rotation
        vals = ["1", "0", "0", "%.17g" % t[0],
                "0", "1", "0", "%.17g" % t[1],
                "0", "0", "1", "%.17g" % t[2]]
        return f"{ts} 1 1 0.5 0.5 0 0 " + " ".join(vals)

    rows.append(pose_row(1000, np.zeros(3)))
    for k in range(1, steps + 1):
        rows.append(pose_row(1000 + 1000 * k, direction * (TRAJ_STEP * k)))
    return "\n".join(rows) + "\n"


def cameras_from_trajectory(text: str, image_size: int):
    """(cond Camera, [target Cameras]) from a trajectory file's text."""
    traj = parse_trajectory(text)
    cams = [fr.camera(image_size, image_size) for fr in traj.frames]
    if len(cams) < 2:
        raise DataError("trajectory needs a conditioning frame plus >= 1 target")
    return cams[0], cams[1:]


def generate_dataset(out_dir, cfg: DatasetConfig) -> dict:
    """Write the dataset; returns the manifest payload."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "synthetic-multiview",
        "seed": cfg.seed,
        "config": asdict(cfg),
        "scene_ids": [scene_name(i) for i in range(cfg.scenes)],
    }
    scales = {}
    for i in range(cfg.scenes):
        scene, direction = build_scene(cfg, i)
        scales[scene.scene_id] = scene.planted_scale
        sdir = out / "scenes" / scene.scene_id
        sdir.mkdir(parents=True, exist_ok=True)
        text = trajectory_lines(direction, cfg.traj_steps)
        (sdir / "trajectory.txt").write_text(text)
        cond, targets = cameras_from_trajectory(text, cfg.image_size)

        if cfg.write_images or cfg.write_depths:
            out_cond = render(scene, cond)
        if cfg.write_images:
            img_dir = sdir / "images"
            img_dir.mkdir(exist_ok=True)
            write_gray_png(img_dir / "cond.png", _quantize16(out_cond.image))
            for k, target in enumerate(targets, start=1):
                cam_true = scaled_camera(cond, target, scene.planted_scale)
                frame = render(scene, cam_true)
                write_gray_png(img_dir / f"target-{k:02d}.png", _quantize16(frame.image))
        if cfg.write_depths:
            depth_dir = sdir / "depths"
            depth_dir.mkdir(exist_ok=True)
            write_pfm(depth_dir / "cond.pfm", out_cond.depth.astype(np.float32))
        if cfg.write_flows:
            flow_dir = sdir / "flows"
            flow_dir.mkdir(exist_ok=True)
            grid = pixel_grid(cfg.image_size, cfg.image_size)
            cached = front_depth(scene, cond, grid)
            for k, target in enumerate(targets, start=1):
                cam_true = scaled_camera(cond, target, scene.planted_scale)
                fwd, _ = gt_flow(scene, cond, cam_true, front_a=cached)
                bwd, _ = gt_flow(scene, cam_true, cond)
                write_flow(flow_dir / f"t{k:02d}-fwd.flo", fwd)
                write_flow(flow_dir / f"t{k:02d}-bwd.flo", bwd)

    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    scales_doc = {"schema_version": SCHEMA_VERSION, "scales": scales}
    (out / "scales.json").write_text(json.dumps(scales_doc, indent=2, sort_keys=True) + "\n")
    return manifest


def _quantize16(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 65535.0), 0, 65535).astype(np.uint16)


@dataclass(frozen=True, eq=False)
class SceneData:
    scene: SyntheticScene
    cond: Camera
    targets: list


def build_scene_data(cfg: DatasetConfig, index: int) -> SceneData:
    """Scene plus trajectory cameras, in memory; equals the on-disk load."""
    scene, direction = build_scene(cfg, index)
    text = trajectory_lines(direction, cfg.traj_steps)
    cond, targets = cameras_from_trajectory(text, cfg.image_size)
    return SceneData(scene=scene, cond=cond, targets=targets)


class DatasetBundle:
    """Loaded dataset: manifest plus lazily rebuilt scenes and cameras."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise DataError(f"no manifest.json under {self.root}")
        self.manifest = json.loads(manifest_path.read_text())
        if self.manifest.get("kind") != "synthetic-multiview":
            raise DataError(f"unrecognized dataset kind {self.manifest.get('kind')!r}")
        self.config = DatasetConfig(**self.manifest["config"])
        self.scene_ids = list(self.manifest["scene_ids"])

    def scene_data(self, index: int) -> SceneData:
        scene, _ = build_scene(self.config, index)
        text = (self.root / "scenes" / scene.scene_id / "trajectory.txt").read_text()
        cond, targets = cameras_from_trajectory(text, self.config.image_size)
        return SceneData(scene=scene, cond=cond, targets=targets)

    def planted_scales(self) -> dict:
        """Evaluation-only: the withheld ground-truth scales."""
        doc = json.loads((self.root / "scales.json").read_text())
        return dict(doc["scales"])
