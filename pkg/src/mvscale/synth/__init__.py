"""Deterministic synthetic multi-view oracle with planted scene scales."""

from .noise import texture_and_grad, smoothstep, smoothstep_deriv, window01
from .scene import (
    GeneratorSim,
    Patch,
    SceneSpec,
    SyntheticScene,
    make_scene,
    scale_scene,
    scene_id_digest,
)
from .render import (
    RenderOutput,
    appearance,
    appearance_and_grad,
    correspondences,
    draw_sample_scale,
    front_depth,
    gt_flow,
    pixel_grid,
    render,
    scaled_camera,
    simulate_gnvs_sample,
)
from .warp import PhotometricProblem, surrogate_loss
from .dataset import (
    DatasetBundle,
    DatasetConfig,
    SceneData,
    build_scene,
    build_scene_data,
    generate_dataset,
    scene_name,
)

__all__ = [
    "texture_and_grad",
    "smoothstep",
    "smoothstep_deriv",
    "window01",
    "GeneratorSim",
    "Patch",
    "SceneSpec",
    "SyntheticScene",
    "make_scene",
    "scale_scene",
    "scene_id_digest",
    "RenderOutput",
    "appearance",
    "appearance_and_grad",
    "correspondences",
    "draw_sample_scale",
    "front_depth",
    "gt_flow",
    "pixel_grid",
    "render",
    "scaled_camera",
    "simulate_gnvs_sample",
    "PhotometricProblem",
    "surrogate_loss",
    "DatasetBundle",
    "DatasetConfig",
    "SceneData",
    "build_scene",
    "build_scene_data",
    "generate_dataset",
    "scene_name",
]
