"""Procedural value noise with analytic gradients.

Lattice values come from a counter-based integer hash (no state, no table),
so any (coordinate, seed) pair evaluates to the same value in any order on
any thread. Interpolation uses the quintic fade 6t^5 - 15t^4 + 10t^3, which
has zero first and second derivatives at the lattice, making the field C2.
The photometric warp differentiates through this, so keep it C2.
"""

from __future__ import annotations

import numpy as np

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_XK = np.uint64(0xC2B2AE3D27D4EB4F)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# octave stack shared by all patch textures. Kept intentionally smooth:
# the photometric warp descends this texture in scale space from inits up
# to ~0.8 log units away, so the detail octave must stay weak enough that
# the coarse octave's slope dominates everywhere in that basin (amp*freq
# ratio ~0.43 here). More/stronger octaves create spurious local minima.
OCTAVES = 2
BASE_FREQ = 1.5
LACUNARITY = 2.17
GAIN = 0.2


_FREQS = BASE_FREQ * LACUNARITY ** np.arange(OCTAVES)
_AMPS = GAIN ** np.arange(OCTAVES)
_NORM = float(_AMPS.sum())
_GRAD_AMPS = _AMPS * _FREQS


def _finalize(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> np.uint64(30))
    h = h * _M1
    h = h ^ (h >> np.uint64(27))
    h = h * _M2
    return h ^ (h >> np.uint64(31))


def _lattice(ix: np.ndarray, iy: np.ndarray, seed) -> np.ndarray:
    """Uniform [0,1) value at integer lattice point (ix, iy) for a seed."""
    ux = np.asarray(ix).astype(np.int64).astype(np.uint64)
    uy = np.asarray(iy).astype(np.int64).astype(np.uint64)
    h = _finalize((ux * _GOLD) ^ (uy * _XK) ^ np.uint64(seed))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _fade_value(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _fade(t: np.ndarray):
    dw = 30.0 * t * t * (t - 1.0) * (t - 1.0)
    return _fade_value(t), dw


def _corner_values(u: np.ndarray, v: np.ndarray, seed):
    """Shared lattice setup: fade coords and the four hashed corner values."""
    x = u.reshape(1, -1) * _FREQS[:, None]  # (octave, point)
    y = v.reshape(1, -1) * _FREQS[:, None]
    x0 = np.floor(x)
    y0 = np.floor(y)
    ux = x0.astype(np.int64).astype(np.uint64) * _GOLD
    uy = y0.astype(np.int64).astype(np.uint64) * _XK
    ux1 = ux + _GOLD  # lattice hash of x0 + 1; uint64 wraps mod 2^64
    uy1 = uy + _XK
    seeds = _octave_seeds(seed)[:, None]
    corners = _finalize(
        np.stack([ux ^ uy, ux1 ^ uy, ux ^ uy1, ux1 ^ uy1]) ^ seeds
    )
    f = (corners >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return x - x0, y - y0, f


def _octave_seeds(seed) -> np.ndarray:
    seed = int(seed) & _MASK64
    return np.array(
        [(seed + (k + 1) * 0x9E3779B97F4A7C15) & _MASK64 for k in range(OCTAVES)],
        dtype=np.uint64,
    )


def texture_and_grad(u: np.ndarray, v: np.ndarray, seed) -> tuple:
    """Multi-octave value noise over patch (u, v), with du/dv gradients.

    Output value lies in [0, 1). The octave amplitudes are normalized to
    sum to 1; the coarsest octave spans the whole patch so the photometric
    loss keeps a usable gradient over large warp offsets. All octaves are
    evaluated in one vectorized pass; this sits on the optimizer's inner
    loop, so mind the per-op overhead when touching it.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = u.shape
    tx, ty, f = _corner_values(u, v, seed)
    f00, f10, f01, f11 = f[0], f[1], f[2], f[3]
    wx, dwx = _fade(tx)
    wy, dwy = _fade(ty)
    ex = f10 - f00  # bottom-edge rise
    exy = (f11 - f01) - ex
    a = f00 + ex * wx
    b = f01 + (f11 - f01) * wx
    bma = b - a
    val = a + bma * wy
    dvx = (ex + exy * wy) * dwx
    dvy = bma * dwy
    total = (_AMPS @ val) / _NORM
    gu = (_GRAD_AMPS @ dvx) / _NORM
    gv = (_GRAD_AMPS @ dvy) / _NORM
    return total.reshape(shape), gu.reshape(shape), gv.reshape(shape)


def texture_value(u: np.ndarray, v: np.ndarray, seed) -> np.ndarray:
    """texture_and_grad's value alone, bit for bit, skipping gradient work."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = u.shape
    tx, ty, f = _corner_values(u, v, seed)
    wx = _fade_value(tx)
    wy = _fade_value(ty)
    ex = f[1] - f[0]
    a = f[0] + ex * wx
    b = f[2] + (f[3] - f[2]) * wx
    val = a + (b - a) * wy
    return ((_AMPS @ val) / _NORM).reshape(shape)


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep on [0,1]; clamped outside; C2 everywhere."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_deriv(t: np.ndarray) -> np.ndarray:
    tc = np.clip(t, 0.0, 1.0)
    d = 30.0 * tc * tc * (tc - 1.0) * (tc - 1.0)
    return np.where((t > 0.0) & (t < 1.0), d, 0.0)


def window01(x: np.ndarray, margin: float):
    """C2 window over [0,1]: 0 at the ends, 1 in the interior plateau.

    Returns (w, dw/dx). Support is exactly [0, 1].
    """
    lo = x / margin
    hi = (1.0 - x) / margin
    sl = smoothstep(lo)
    sh = smoothstep(hi)
    w = sl * sh
    dw = (smoothstep_deriv(lo) * sh - sl * smoothstep_deriv(hi)) / margin
    return w, dw


def window01_value(x: np.ndarray, margin: float) -> np.ndarray:
    """window01's value alone, for hot paths that never differentiate it."""
    return smoothstep(x / margin) * smoothstep((1.0 - x) / margin)
