"""Scene construction: textured planar patches with a planted scale.

A patch is the parallelogram X(u, v) = origin + u*e_u + v*e_v over
(u, v) in [0,1]^2, carrying a procedural texture and a C2 alpha fade at
its border. Patches are laid out in disjoint depth bands so that their
front-to-back order along any ray used by the cameras never flips;
renderers rely on list order being far-to-near.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

BACKDROP_DEPTH = 6.0
BACKDROP_EXTENT = 9.0
ALPHA_MARGIN = 0.12  # uv-space edge fade width
BACKGROUND = 0.5  # image value where no patch is hit


def _cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


@dataclass(frozen=True, eq=False)
class Patch:
    origin: np.ndarray  # (3,)
    e_u: np.ndarray  # (3,)
    e_v: np.ndarray  # (3,)
    tex_seed: int

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "e_u", np.asarray(self.e_u, dtype=float).reshape(3))
        object.__setattr__(self, "e_v", np.asarray(self.e_v, dtype=float).reshape(3))

    @property
    def normal(self) -> np.ndarray:
        return self.frame[0]

    @property
    def frame(self) -> tuple:
        """(normal, q_un, q_vn), cached.

        The covectors q_un = (n x e_u) / |n|^2 and q_vn = (e_v x n) / |n|^2
        turn the barycentric solves in the tracer into plain dot products:
        for a point p on the plane, u = (p - origin) . q_vn and
        v = (p - origin) . q_un.
        """
        fr = self.__dict__.get("_frame")
        if fr is None:
            n = _cross3(self.e_u, self.e_v)
            n2 = float(n @ n)
            fr = (n, _cross3(n, self.e_u) / n2, _cross3(self.e_v, n) / n2)
            object.__setattr__(self, "_frame", fr)
        return fr


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    scene_id: str
    patches: tuple  # far-to-near Patch order
    planted_scale: float

    def __post_init__(self):
        if len(self.patches) < 1:
            raise ConfigError("scene needs at least one patch")
        if not (self.planted_scale > 0):
            raise ConfigError(f"planted scale must be positive, got {self.planted_scale}")


@dataclass(frozen=True)
class SceneSpec:
    """Distribution parameters for make_scene."""

    min_patches: int = 3
    max_patches: int = 8
    depth_near: float = 1.4
    depth_far: float = 5.0
    log_scale_low: float = -1.0
    log_scale_high: float = 1.0

    def __post_init__(self):
        if self.min_patches < 1 or self.max_patches < self.min_patches:
            raise ConfigError(
                f"bad patch count range [{self.min_patches}, {self.max_patches}]"
            )
        if not (0 < self.depth_near < self.depth_far < BACKDROP_DEPTH):
            raise ConfigError(
                f"depth range ({self.depth_near}, {self.depth_far}) must sit inside "
                f"(0, {BACKDROP_DEPTH})"
            )
        if self.log_scale_low > self.log_scale_high:
            raise ConfigError("log scale range inverted")


@dataclass(frozen=True)
class GeneratorSim:
    """Stand-in for a generative sampler: log-normal scale noise."""

    scale_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scale_noise_sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.scale_noise_sigma}")


def scene_id_digest(scene_id: str) -> int:
    """Stable 64-bit digest of a scene id for counter-based rng keys."""
    return int.from_bytes(hashlib.sha256(scene_id.encode()).digest()[:8], "big")


def _rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def make_scene(spec: SceneSpec, rng: np.random.Generator, scene_id: str = "scene-0000") -> SyntheticScene:
    """Deterministic scene: a frustum-filling backdrop plus tilted foreground patches."""
    n_patches = int(rng.integers(spec.min_patches, spec.max_patches + 1))
    planted = float(np.exp(rng.uniform(spec.log_scale_low, spec.log_scale_high)))

    half = BACKDROP_EXTENT / 2.0
    patches = [
        Patch(
            origin=np.array([-half, -half, BACKDROP_DEPTH]),
            e_u=np.array([BACKDROP_EXTENT, 0.0, 0.0]),
            e_v=np.array([0.0, BACKDROP_EXTENT, 0.0]),
            tex_seed=int(rng.integers(0, 2**63)),
        )
    ]

    n_fore = n_patches - 1
    if n_fore > 0:
        slot_w = (spec.depth_far - spec.depth_near) / n_fore
        fore = []
        for i in range(n_fore):
            z_center = spec.depth_near + (i + 0.5) * slot_w + rng.uniform(-0.2, 0.2) * slot_w
            size_u = rng.uniform(0.5, 1.1)
            size_v = rng.uniform(0.5, 1.1)
            # cap tilt so the patch's z-extent stays inside its depth slot
            h_max = 0.25 * slot_w
            sin_cap = min(np.sin(0.44), 2.0 * h_max / (size_u + size_v))
            theta = np.arcsin(sin_cap) * rng.uniform(0.4, 0.95)
            tilt_axis = np.array(
                [np.cos(rng.uniform(0, 2 * np.pi)), np.sin(rng.uniform(0, 2 * np.pi)), 0.0]
            )
            rot = _rotation_about(tilt_axis, theta)
            spin = rng.uniform(0, 2 * np.pi)
            u_dir = rot @ np.array([np.cos(spin), np.sin(spin), 0.0])
            v_dir = rot @ np.array([-np.sin(spin), np.cos(spin), 0.0])
            r = rng.uniform(0.0, 0.30) * z_center
            phi = rng.uniform(0, 2 * np.pi)
            center = np.array([r * np.cos(phi), r * np.sin(phi), z_center])
            e_u = size_u * u_dir
            e_v = size_v * v_dir
            fore.append(
                Patch(
                    origin=center - 0.5 * e_u - 0.5 * e_v,
                    e_u=e_u,
                    e_v=e_v,
                    tex_seed=int(rng.integers(0, 2**63)),
                )
            )
        # far-to-near behind the backdrop entry
        fore.sort(key=lambda p: -(p.origin[2] + 0.5 * p.e_u[2] + 0.5 * p.e_v[2]))
        patches.extend(fore)

    return SyntheticScene(scene_id=scene_id, patches=tuple(patches), planted_scale=planted)


def scale_scene(scene: SyntheticScene, c: float) -> SyntheticScene:
    """Scale all geometry by c (textures ride along in uv space)."""
    if not (c > 0):
        raise ConfigError(f"scene scale factor must be positive, got {c}")
    patches = tuple(
        Patch(origin=p.origin * c, e_u=p.e_u * c, e_v=p.e_v * c, tex_seed=p.tex_seed)
        for p in scene.patches
    )
    return SyntheticScene(scene.scene_id, patches, scene.planted_scale)
