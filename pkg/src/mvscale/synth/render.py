"""Exact rendering of patch scenes: images, depths, flows, correspondences.

Everything is ray-cast analytically against the patch planes, so depths and
reprojections are exact to float precision and the composited appearance is
a C2 function of the pixel coordinate (needed by the photometric warp,
which differentiates through it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..geometry import Camera, PixelMatch, Pose, Z_MIN, compose, project_points, relative_pose
from .noise import texture_and_grad, texture_value, window01, window01_value
from .scene import ALPHA_MARGIN, BACKGROUND, GeneratorSim, SyntheticScene, scene_id_digest

OCCLUSION_TOL = 1e-6
_DENOM_MIN = 1e-12  # ray nearly parallel to a patch plane counts as a miss


@dataclass(frozen=True, eq=False)
class RenderOutput:
    image: np.ndarray  # (H, W) in [0, 1]
    depth: np.ndarray  # (H, W), +inf where nothing is hit
    visibility: np.ndarray  # (H, W) bool


def _cam_rays(cam: Camera, pix: np.ndarray):
    """World-space ray directions with unit camera-frame z, plus the center.

    With d_cam.z = 1 the ray parameter equals camera-frame depth, so patch
    intersection parameters double as z-buffer entries.
    """
    k = cam.intrinsics
    dx = (pix[..., 0] - k.cx) / k.fx
    dy = (pix[..., 1] - k.cy) / k.fy
    d_cam = np.stack([dx, dy, np.ones_like(dx)], axis=-1)
    d_world = d_cam @ cam.pose.rotation  # R^T d
    return d_world, cam.pose.center


def _patch_pixel_bbox(patch, cam: Camera):
    """Conservative pixel bbox of the patch's alpha support, or None.

    The support is the open (u, v) in (0, 1) quad, planar and convex, so
    when all four corners sit safely in front of the camera its projection
    lies inside the bbox of the projected corners. Returns None (no cull)
    when any corner is too close to the camera plane for that to hold.
    """
    o = patch.origin
    corners = np.stack([o, o + patch.e_u, o + patch.e_v, o + patch.e_u + patch.e_v])
    x_c = corners @ cam.pose.rotation.T + cam.pose.translation
    z = x_c[:, 2]
    if np.any(z < 1e-3):
        return None
    k = cam.intrinsics
    px = k.fx * x_c[:, 0] / z + k.cx
    py = k.fy * x_c[:, 1] / z + k.cy
    pad = 1e-6  # swallows projection round-off at the support boundary
    return px.min() - pad, px.max() + pad, py.min() - pad, py.max() + pad


def _trace(scene: SyntheticScene, cam: Camera, pix: np.ndarray,
           want_value: bool, want_pixel_grad: bool = False):
    """Composite the far-to-near patch stack along each pixel ray.

    Returns (image, dimage_dpixel, front_t, front_idx, front_alpha); the
    first two are None unless requested. Each patch is evaluated only on
    the points inside its projected support bbox; skipped points keep the
    background / miss values a full evaluation would give them anyway.
    """
    pix = np.asarray(pix, dtype=float)
    shape = pix.shape[:-1]
    pixf = pix.reshape(-1, 2)
    npts = pixf.shape[0]
    d_all, center = _cam_rays(cam, pixf)
    k = cam.intrinsics
    rot_t = cam.pose.rotation.T
    dx_dir = rot_t[:, 0] / k.fx  # dd_w/dpx
    dy_dir = rot_t[:, 1] / k.fy  # dd_w/dpy

    img = np.full(npts, BACKGROUND) if want_value else None
    dimg = np.zeros((npts, 2)) if want_pixel_grad else None
    front_t = np.full(npts, np.inf)
    front_idx = np.full(npts, -1, dtype=int)
    front_alpha = np.zeros(npts)

    for idx, patch in enumerate(scene.patches):
        n, q_un, q_vn = patch.frame
        sel = None
        d_w = d_all
        box = _patch_pixel_bbox(patch, cam)
        if box is not None:
            inb = (pixf[:, 0] >= box[0]) & (pixf[:, 0] <= box[1]) \
                & (pixf[:, 1] >= box[2]) & (pixf[:, 1] <= box[3])
            if not inb.any():
                continue
            if not inb.all():
                sel = np.flatnonzero(inb)
                d_w = d_all[sel]
        denom = d_w @ n
        safe = np.abs(denom) > _DENOM_MIN
        denom_safe = np.where(safe, denom, 1.0)
        a = float((patch.origin - center) @ n)
        t = a / denom_safe
        hit_ok = safe & (t > Z_MIN)
        t_safe = np.where(hit_ok, t, 1.0)
        rel = t_safe[:, None] * d_w + (center - patch.origin)
        u = rel @ q_vn
        v = rel @ q_un
        if want_value:
            uvc = np.clip(np.stack([u, v]), -0.5, 1.5)
        else:
            uvc = np.stack([u, v])  # window01 is 0 outside [0,1] already
        if want_pixel_grad:
            w_uv, dw_uv = window01(uvc, ALPHA_MARGIN)
        else:
            w_uv = window01_value(uvc, ALPHA_MARGIN)
        alpha = np.where(hit_ok, w_uv[0] * w_uv[1], 0.0)

        hit_pos = alpha > 0.0
        if not hit_pos.any():
            continue
        if sel is None:
            front_t = np.where(hit_pos, t_safe, front_t)
            front_idx = np.where(hit_pos, idx, front_idx)
            front_alpha = np.where(hit_pos, alpha, front_alpha)
        else:
            tgt = sel[hit_pos]
            front_t[tgt] = t_safe[hit_pos]
            front_idx[tgt] = idx
            front_alpha[tgt] = alpha[hit_pos]

        if not want_value:
            continue
        uc, vc = uvc[0], uvc[1]
        img_prev = img if sel is None else img[sel]
        if want_pixel_grad:
            val, tex_gu, tex_gv = texture_and_grad(uc, vc, patch.tex_seed)
            # chain rule: pixel -> ray -> intersection point -> (u, v)
            wu, wv = w_uv[0], w_uv[1]
            dwu, dwv = dw_uv[0], dw_uv[1]
            dt_dpx = -t_safe * (dx_dir @ n) / denom_safe
            dt_dpy = -t_safe * (dy_dir @ n) / denom_safe
            cu_ray = d_w @ q_un
            cv_ray = d_w @ q_vn
            cu_x = float(dx_dir @ q_un)
            cu_y = float(dy_dir @ q_un)
            cv_x = float(dx_dir @ q_vn)
            cv_y = float(dy_dir @ q_vn)
            du = np.stack(
                [dt_dpx * cv_ray + t_safe * cv_x, dt_dpy * cv_ray + t_safe * cv_y],
                axis=-1,
            )
            dv = np.stack(
                [dt_dpx * cu_ray + t_safe * cu_x, dt_dpy * cu_ray + t_safe * cu_y],
                axis=-1,
            )
            live = (hit_pos & (u == uc) & (v == vc))[:, None]
            du = np.where(live, du, 0.0)
            dv = np.where(live, dv, 0.0)
            dval = tex_gu[:, None] * du + tex_gv[:, None] * dv
            dalpha = (dwu * wv)[:, None] * du + (wu * dwv)[:, None] * dv
            dimg_prev = dimg if sel is None else dimg[sel]
            dimg_new = (
                dimg_prev * (1.0 - alpha)[:, None]
                + (val - img_prev)[:, None] * dalpha
                + alpha[:, None] * dval
            )
            if sel is None:
                dimg = dimg_new
            else:
                dimg[sel] = dimg_new
        else:
            val = texture_value(uc, vc, patch.tex_seed)
        img_new = img_prev * (1.0 - alpha) + val * alpha
        if sel is None:
            img = img_new
        else:
            img[sel] = img_new

    if want_value:
        img = img.reshape(shape)
    if want_pixel_grad:
        dimg = dimg.reshape(shape + (2,))
    return (img, dimg, front_t.reshape(shape),
            front_idx.reshape(shape), front_alpha.reshape(shape))


def appearance(scene: SyntheticScene, cam: Camera, pix: np.ndarray) -> np.ndarray:
    """Composited scene value along the ray through each (continuous) pixel."""
    img, _, _, _, _ = _trace(scene, cam, pix, want_value=True)
    return img


def appearance_and_grad(scene: SyntheticScene, cam: Camera, pix: np.ndarray):
    """Appearance plus its analytic gradient w.r.t. the pixel coordinate."""
    img, dimg, _, _, _ = _trace(scene, cam, pix, want_value=True, want_pixel_grad=True)
    return img, dimg


def front_depth(scene: SyntheticScene, cam: Camera, pix: np.ndarray):
    """(depth, patch index, alpha) of the nearest hit; inf/-1/0 on a miss."""
    _, _, ft, fi, fa = _trace(scene, cam, pix, want_value=False)
    return ft, fi, fa


def pixel_grid(width: int, height: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))
    return np.stack([xs, ys], axis=-1)


def render(scene: SyntheticScene, cam: Camera) -> RenderOutput:
    """Full-frame composite plus exact z-buffer at pixel centers."""
    k = cam.intrinsics
    pix = pixel_grid(k.width, k.height)
    img, _, ft, fi, _ = _trace(scene, cam, pix, want_value=True)
    return RenderOutput(image=img, depth=ft, visibility=fi >= 0)


def gt_flow(scene: SyntheticScene, cam_a: Camera, cam_b: Camera, front_a=None):
    """Exact optical flow a->b at a's pixel centers, with a validity mask.

    Mask excludes pixels with no surface in a, targets behind b or outside
    b's image, and pixels whose surface point is occluded in b (z-test on
    b's own front surface, 1e-6 tolerance). front_a can carry a cached
    front_depth(scene, cam_a, pixel_grid(...)) result for hot loops that
    reuse one source view.
    """
    ka, kb = cam_a.intrinsics, cam_b.intrinsics
    pix = pixel_grid(ka.width, ka.height)
    ft, fi, _ = front_a if front_a is not None else front_depth(scene, cam_a, pix)
    vis_a = fi >= 0
    d_w, center = _cam_rays(cam_a, pix)
    t_safe = np.where(vis_a, ft, 1.0)
    points = center + t_safe[..., None] * d_w
    p_b, z_b, in_front = project_points(points.reshape(-1, 3), cam_b)
    p_b = p_b.reshape(pix.shape)
    z_b = z_b.reshape(vis_a.shape)
    in_front = in_front.reshape(vis_a.shape)
    with np.errstate(invalid="ignore"):
        in_bounds = (
            (p_b[..., 0] >= 0)
            & (p_b[..., 0] <= kb.width - 1)
            & (p_b[..., 1] >= 0)
            & (p_b[..., 1] <= kb.height - 1)
        )
    in_bounds &= in_front  # NaN pixels fail the comparisons already; be explicit
    p_b_filled = np.where(in_front[..., None], p_b, 0.0)
    ft_b, _, _ = front_depth(scene, cam_b, p_b_filled)
    with np.errstate(invalid="ignore"):
        occluded = z_b > ft_b + OCCLUSION_TOL
    mask = vis_a & in_front & in_bounds & ~occluded
    flow = np.where(mask[..., None], p_b_filled - pix, 0.0)
    return flow, mask


def correspondences(scene: SyntheticScene, cam_a: Camera, cam_b: Camera,
                    n: int, rng: np.random.Generator):
    """n exact pixel matches sampled uniformly over the co-visible region."""
    if n < 1:
        raise ConfigError(f"need n >= 1 matches, got {n}")
    flow, mask = gt_flow(scene, cam_a, cam_b)
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        raise DataError("no co-visible pixels between the two views")
    chosen = rng.choice(flat, size=n, replace=flat.size < n)
    h, w = mask.shape
    ys, xs = np.unravel_index(chosen, (h, w))
    p1 = np.stack([xs.astype(float), ys.astype(float)], axis=-1)
    p2 = p1 + flow[ys, xs]
    return [PixelMatch(p1[i], p2[i]) for i in range(n)]


def draw_sample_scale(gen: GeneratorSim, scene_id: str, sample_index: int) -> float:
    """Log-normal scale draw from a counter-based stream; order-independent."""
    seq = np.random.SeedSequence((gen.seed, scene_id_digest(scene_id), sample_index))
    z = np.random.default_rng(seq).standard_normal()
    return float(np.exp(gen.scale_noise_sigma * z))


def scaled_camera(cond: Camera, target: Camera, s: float) -> Camera:
    """Target camera with its motion relative to cond scaled by s."""
    rel = relative_pose(cond.pose, target.pose)
    scaled = Pose(rel.rotation, rel.translation * s)
    return Camera(target.intrinsics, compose(scaled, cond.pose))


def simulate_gnvs_sample(scene: SyntheticScene, cond: Camera, target: Camera,
                         gen: GeneratorSim, sample_index: int):
    """One generated view: target motion rescaled by a drawn log-normal factor.

    Returns (RenderOutput, drawn_scale, forward flow cond->sample,
    backward flow sample->cond).
    """
    s = draw_sample_scale(gen, scene.scene_id, sample_index)
    cam_s = scaled_camera(cond, target, s)
    out = render(scene, cam_s)
    fwd, _ = gt_flow(scene, cond, cam_s)
    bwd, _ = gt_flow(scene, cam_s, cond)
    return out, s, fwd, bwd
