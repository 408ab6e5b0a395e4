"""Sample flow consistency (SFC) over sets of optical flow fields.

Flow fields are (H, W, 2) float arrays holding (u, v) pixel displacements;
masks are (H, W) bool arrays where True marks a valid (unmasked) pixel.

The pipeline: forward-backward cycle masks per sample, a shared support
mask (ground-truth based or consensus), flow normalization by the mean
unmasked magnitude, per-pixel median absolute deviation across samples,
and the scene-level SFC as the spatial median of that map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError

MIN_MEAN_FLOW = 1e-9


@dataclass(frozen=True)
class MaskConfig:
    """Cycle-consistency mask parameters.

    threshold_t: max tolerated abs component of the fwd+bwd residual, px.
    consensus_epsilon: a pixel survives the consensus mask when the
        fraction of samples voting for it strictly exceeds this.
    literal_subtraction: score the residual as fwd - bwd(target) instead
        of the standard fwd + bwd(target); kept for comparison runs, a
        consistent pair (f, -f) then scores 2|f|.
    """

    threshold_t: float = 1.5
    consensus_epsilon: float = 0.5
    literal_subtraction: bool = False

    def __post_init__(self):
        if not (self.threshold_t > 0):
            raise ConfigError(f"threshold_t must be > 0, got {self.threshold_t}")
        if not (0.0 < self.consensus_epsilon < 1.0):
            raise ConfigError(
                f"consensus_epsilon must lie in (0,1), got {self.consensus_epsilon}"
            )


@dataclass(frozen=True, eq=False)
class SfcResult:
    sfc: float
    mad: np.ndarray  # (H, W), NaN where undefined
    mean_flow_magnitude: float
    sample_count: int
    mask_source: str  # "ground-truth" | "consensus"
    sample_masks: np.ndarray  # (n, H, W) bool
    m_star: np.ndarray  # (H, W) bool
    config: MaskConfig


def _as_flow(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 3 or f.shape[2] != 2:
        raise DataError(f"flow must have shape (H, W, 2), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DataError("flow contains non-finite values")
    return f


def _same_shape(shapes) -> tuple:
    shapes = list(shapes)
    for s in shapes[1:]:
        if s != shapes[0]:
            raise DataError(f"dimension mismatch: {shapes[0]} vs {s}")
    return shapes[0]


def bilinear_sample(flow: np.ndarray, p) -> np.ndarray | None:
    """Sample one point (x, y); None when outside [0, W-1] x [0, H-1]."""
    flow = _as_flow(flow)
    vals, ok = bilinear_sample_many(flow, np.asarray(p, dtype=float).reshape(1, 2))
    return vals[0] if ok[0] else None


def bilinear_sample_many(flow: np.ndarray, pts: np.ndarray):
    """Bilinear samples at (..., 2) xy points.

    Returns (values (..., 2), in_bounds (...,) bool); out-of-bounds rows
    are NaN.
    """
    h, w = flow.shape[:2]
    x, y = pts[..., 0], pts[..., 1]
    ok = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.clip(x, 0, w - 1)
    ys = np.clip(y, 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    v = (
        flow[y0, x0] * (1 - fx) * (1 - fy)
        + flow[y0, x1] * fx * (1 - fy)
        + flow[y1, x0] * (1 - fx) * fy
        + flow[y1, x1] * fx * fy
    )
    return np.where(ok[..., None], v, np.nan), ok


def _pixel_grid(h: int, w: int) -> np.ndarray:
    xs, ys = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    return np.stack([xs, ys], axis=-1)


def fb_consistency_mask(
    f_fwd: np.ndarray, f_bwd: np.ndarray, cfg: MaskConfig = MaskConfig()
) -> np.ndarray:
    """Cycle-consistency mask: True where the forward-backward residual is small.

    Pixels whose forward target leaves the grid are masked out; elsewhere
    the residual d = f_fwd(P) + f_bwd(P + f_fwd(P)) must satisfy
    max(|d.x|, |d.y|) <= threshold_t.
    """
    f_fwd = _as_flow(f_fwd)
    f_bwd = _as_flow(f_bwd)
    _same_shape([f_fwd.shape, f_bwd.shape])
    h, w = f_fwd.shape[:2]
    target = _pixel_grid(h, w) + f_fwd
    back, ok = bilinear_sample_many(f_bwd, target)
    if cfg.literal_subtraction:
        d = f_fwd - back
    else:
        d = f_fwd + back
    with np.errstate(invalid="ignore"):
        small = np.max(np.abs(d), axis=-1) <= cfg.threshold_t
    return ok & small


def consensus_mask(masks, epsilon: float = 0.5) -> np.ndarray:
    """Pixel passes iff the fraction of passing samples strictly exceeds epsilon."""
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim != 3 or masks.shape[0] < 1:
        raise DataError(f"need a non-empty (n, H, W) mask stack, got {masks.shape}")
    if not (0.0 < epsilon < 1.0):
        raise ConfigError(f"epsilon must lie in (0,1), got {epsilon}")
    return np.mean(masks, axis=0) > epsilon


def normalize_flows(flows, masks):
    """Divide every flow by the mean magnitude over each sample's unmasked pixels.

    Returns (normalized (n, H, W, 2), f_bar).
    """
    flows = np.stack([_as_flow(f) for f in flows])
    masks = np.asarray(masks, dtype=bool)
    if masks.shape != flows.shape[:3]:
        raise DataError(f"mask stack {masks.shape} does not match flows {flows.shape[:3]}")
    mags = np.linalg.norm(flows, axis=-1)
    if not masks.any():
        raise DataError("no valid flow support: all pixels masked")
    f_bar = float(np.mean(mags[masks]))
    if f_bar < MIN_MEAN_FLOW:
        raise NumericError(f"degenerate zero flow: mean magnitude {f_bar:.3g}")
    return flows / f_bar, f_bar


def mad_map(normalized, masks) -> np.ndarray:
    """Per-pixel median distance of normalized sample flows from their mean.

    At each pixel only samples whose mask passes contribute; pixels with
    fewer than two contributors come back NaN.
    """
    flows = np.asarray(normalized, dtype=float)
    masks = np.asarray(masks, dtype=bool)
    if flows.ndim != 4 or flows.shape[0] < 2:
        raise DataError(f"need >= 2 sample flows, got shape {flows.shape}")
    if masks.shape != flows.shape[:3]:
        raise DataError(f"mask stack {masks.shape} does not match flows {flows.shape[:3]}")
    count = masks.sum(axis=0)
    m = masks[..., None]
    mean = np.sum(flows * m, axis=0) / np.maximum(count, 1)[..., None]
    dev = np.linalg.norm(flows - mean[None], axis=-1)
    # median over contributors only: park masked entries at +inf and sort
    dev = np.where(masks, dev, np.inf)
    dev.sort(axis=0)
    lo = np.maximum(count - 1, 0) // 2
    hi = count // 2
    out = 0.5 * (np.take_along_axis(dev, lo[None], axis=0)[0]
                 + np.take_along_axis(dev, hi[None], axis=0)[0])
    out[count < 2] = np.nan
    return out


def sfc(mad: np.ndarray, m_star: np.ndarray) -> float:
    """Median of the MAD map over supported pixels."""
    mad = np.asarray(mad, dtype=float)
    m_star = np.asarray(m_star, dtype=bool)
    _same_shape([mad.shape, m_star.shape])
    support = m_star & np.isfinite(mad)
    if not support.any():
        raise DataError("empty SFC support: no valid pixel survives the mask")
    return float(np.median(mad[support]))


def sfc_pipeline(
    sample_flow_pairs,
    gt_flow_pair=None,
    cfg: MaskConfig = MaskConfig(),
) -> SfcResult:
    """Full SFC computation from (forward, backward) flow pairs.

    sample_flow_pairs: list of (f_fwd, f_bwd) per generated sample.
    gt_flow_pair: optional (f_fwd, f_bwd) against the real target frame;
        when present its cycle mask becomes the support M_*, otherwise
        M_* is the consensus over per-sample masks.
    """
    if len(sample_flow_pairs) < 2:
        raise DataError(f"need >= 2 sample flow pairs, got {len(sample_flow_pairs)}")
    fwd = [pair[0] for pair in sample_flow_pairs]
    sample_masks = np.stack(
        [fb_consistency_mask(f, b, cfg) for f, b in sample_flow_pairs]
    )
    if gt_flow_pair is not None:
        m_star = fb_consistency_mask(gt_flow_pair[0], gt_flow_pair[1], cfg)
        mask_source = "ground-truth"
    else:
        m_star = consensus_mask(sample_masks, cfg.consensus_epsilon)
        mask_source = "consensus"
    normalized, f_bar = normalize_flows(fwd, sample_masks)
    mad = mad_map(normalized, sample_masks)
    value = sfc(mad, m_star)
    return SfcResult(
        sfc=value,
        mad=mad,
        mean_flow_magnitude=f_bar,
        sample_count=len(sample_flow_pairs),
        mask_source=mask_source,
        sample_masks=sample_masks,
        m_star=m_star,
        config=cfg,
    )


def edge_heatmap(images) -> np.ndarray:
    """Mean Sobel gradient magnitude over images, max-normalized to [0, 1]."""
    imgs = [np.asarray(im, dtype=float) for im in images]
    if len(imgs) < 1:
        raise DataError("need >= 1 image")
    _same_shape([im.shape for im in imgs])
    if imgs[0].ndim != 2:
        raise DataError(f"images must be 2-D grayscale, got shape {imgs[0].shape}")
    acc = np.zeros_like(imgs[0])
    for im in imgs:
        p = np.pad(im, 1, mode="edge")
        gx = (
            p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]
            - p[:-2, :-2] - 2 * p[1:-1, :-2] - p[2:, :-2]
        )
        gy = (
            p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]
            - p[:-2, :-2] - 2 * p[:-2, 1:-1] - p[:-2, 2:]
        )
        acc += np.hypot(gx, gy)
    acc /= len(imgs)
    peak = acc.max()
    if peak > 0:
        acc /= peak
    return acc
