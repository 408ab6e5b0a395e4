"""Depth-based photometric warp loss, differentiable in the motion scale.

For a target view rendered at the scene's true geometry, each supported
target pixel's surface point is carried into the conditioning view with
the relative translation scaled by a candidate s, and the conditioning
appearance there is compared against the target intensity. The minimum
sits at the planted scale, where the warp is exact.

Support pixels are chosen once, at the true geometry: the target pixel
must sit on the opaque interior of its surface patch (alpha exactly 1)
and the same patch must be the front surface in the conditioning view,
so both sides of the residual see the same texture value at the optimum.
A C2 border window downweights warped points approaching the image edge,
keeping the loss differentiable when pixels drift out of frame.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..geometry import Camera, Z_MIN, relative_pose
from .noise import smoothstep, smoothstep_deriv
from .render import _cam_rays, _trace, appearance_and_grad, pixel_grid, scaled_camera
from .scene import SyntheticScene

BORDER_MARGIN_PX = 6.0
_INTERIOR_ALPHA = 1.0 - 1e-12


def _window_px(x: np.ndarray, length: float, margin: float):
    """C2 window over [0, length] in pixels; returns (w, dw/dx)."""
    lo = x / margin
    hi = (length - x) / margin
    sl = smoothstep(lo)
    sh = smoothstep(hi)
    w = sl * sh
    dw = (smoothstep_deriv(lo) * sh - sl * smoothstep_deriv(hi)) / margin
    return w, dw


class PhotometricProblem:
    """Precomputed warp-loss evaluator for one scene and >= 1 target views.

    loss_and_grad(s) is cheap and exact; construction does the rendering
    and support selection once. max_pixels subsamples the pooled support
    (seeded) to bound per-call cost for optimization loops.
    """

    def __init__(self, scene: SyntheticScene, cond: Camera, targets,
                 max_pixels: int | None = None, rng: np.random.Generator | None = None,
                 border_margin_px: float = BORDER_MARGIN_PX):
        if isinstance(targets, Camera):
            targets = [targets]
        self.scene = scene
        self.scene_id = scene.scene_id
        self.cond = cond
        k = cond.intrinsics
        self._length_x = float(k.width - 1)
        self._length_y = float(k.height - 1)
        self._margin = float(border_margin_px)

        anchors = []  # target-frame surface points, one block per target
        trans = []  # (R_rel^T, R_rel^T t_rel) per block
        values = []  # target intensities
        for target in targets:
            cam_true = scaled_camera(cond, target, scene.planted_scale)
            kt = cam_true.intrinsics
            pix = pixel_grid(kt.width, kt.height)
            img, _, ft, fi, fa = _trace(scene, cam_true, pix, want_value=True)
            interior = (fi >= 0) & (fa >= _INTERIOR_ALPHA)
            if not interior.any():
                continue
            d_w, center = _cam_rays(cam_true, pix)
            points = center + np.where(interior, ft, 1.0)[..., None] * d_w
            # true conditioning-frame coordinates of each surface point
            x_c = cond.pose.apply(points)
            z_c = x_c[..., 2]
            with np.errstate(divide="ignore", invalid="ignore"):
                px = k.fx * x_c[..., 0] / z_c + k.cx
                py = k.fy * x_c[..., 1] / z_c + k.cy
            with np.errstate(invalid="ignore"):
                inside = (
                    interior
                    & (z_c > Z_MIN)
                    & (px >= self._margin)
                    & (px <= self._length_x - self._margin)
                    & (py >= self._margin)
                    & (py <= self._length_y - self._margin)
                )
            p_cond = np.where(inside[..., None], np.stack([px, py], axis=-1), 0.0)
            ft_c, fi_c, _ = _trace(scene, cond, p_cond, want_value=False)[2:5]
            same_front = inside & (fi_c == fi)
            if not same_front.any():
                continue
            sel = same_front
            x_t = cam_true.pose.apply(points)  # target-frame coordinates
            rel = relative_pose(cond.pose, target.pose)
            anchors.append((rel.rotation.T @ x_t[sel].T).T)
            trans.append(rel.rotation.T @ rel.translation)
            values.append(img[sel])

        if not anchors:
            raise DataError("no photometric support between the views")

        a_all = np.concatenate(anchors, axis=0)
        b_all = np.concatenate(
            [np.broadcast_to(b, (len(v), 3)) for b, v in zip(trans, values)], axis=0
        )
        i_all = np.concatenate(values, axis=0)
        if max_pixels is not None and len(i_all) > max_pixels:
            if rng is None:
                rng = np.random.default_rng(0)
            keep = rng.choice(len(i_all), size=max_pixels, replace=False)
            keep.sort()
            a_all, b_all, i_all = a_all[keep], b_all[keep], i_all[keep]
        self._anchor = a_all  # x_c(s) = anchor - s * tvec
        self._tvec = b_all
        self._target_value = i_all

    @property
    def pixel_count(self) -> int:
        return len(self._target_value)

    def loss_and_grad(self, s: float):
        """Mean windowed squared residual and its exact derivative in s."""
        s = float(s)
        k = self.cond.intrinsics
        x = self._anchor - s * self._tvec
        z = x[:, 2]
        ok = z > Z_MIN
        z = np.where(ok, z, 1.0)
        px = k.fx * x[:, 0] / z + k.cx
        py = k.fy * x[:, 1] / z + k.cy
        pix = np.stack([px, py], axis=-1)
        val, dval_dp = appearance_and_grad(self.scene, self.cond, pix)
        wx, dwx = _window_px(px, self._length_x, self._margin)
        wy, dwy = _window_px(py, self._length_y, self._margin)
        w = np.where(ok, wx * wy, 0.0)
        r = val - self._target_value
        loss = float(np.mean(w * r * r))

        dx_ds = -self._tvec  # d x_c / ds
        dpx_ds = k.fx * (dx_ds[:, 0] * z - x[:, 0] * dx_ds[:, 2]) / (z * z)
        dpy_ds = k.fy * (dx_ds[:, 1] * z - x[:, 1] * dx_ds[:, 2]) / (z * z)
        dval_ds = dval_dp[:, 0] * dpx_ds + dval_dp[:, 1] * dpy_ds
        dw_ds = np.where(ok, dwx * wy * dpx_ds + wx * dwy * dpy_ds, 0.0)
        dloss = float(np.mean(dw_ds * r * r + 2.0 * w * r * dval_ds))
        return loss, dloss


def surrogate_loss(scene: SyntheticScene, cond: Camera, target: Camera, s: float):
    """One-shot warp loss and d loss / d s for a single target view.

    Convenience wrapper over PhotometricProblem; build the problem object
    directly when evaluating many scales on one scene.
    """
    if not (s > 0):
        raise DataError(f"scale must be positive, got {s}")
    return PhotometricProblem(scene, cond, target).loss_and_grad(s)
