"""Per-scene scale learning.

Scales live as unconstrained betas mapped through s = exp(a * clamp(beta))
so they stay inside [e^-a, e^+a]. Each scene gets its own Adam state; the
loss is pluggable so any (loss, dloss/ds) evaluator can drive the betas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericError


@dataclass(frozen=True)
class ScaleParam:
    beta: float
    a: float = 1.0

    def __post_init__(self):
        if not (self.a > 0):
            raise ConfigError(f"parameter a must be positive, got {self.a}")


def scale_from_beta(p: ScaleParam) -> float:
    """s = exp(a * clamp(beta, -1, +1))."""
    return math.exp(p.a * min(1.0, max(-1.0, p.beta)))


def dscale_dbeta(p: ScaleParam) -> float:
    """Exact derivative of scale_from_beta.

    Zero outside the clamp; at |beta| = 1 the interior one-sided value is
    used so boundary parameters are not permanently stuck.
    """
    if abs(p.beta) > 1.0:
        return 0.0
    return p.a * scale_from_beta(p)


def beta_for_scale(s: float, a: float = 1.0) -> float:
    """Beta whose scale is s (clamped into the representable range)."""
    if not (s > 0):
        raise ConfigError(f"scale must be positive, got {s}")
    return min(1.0, max(-1.0, math.log(s) / a))


@dataclass(frozen=True)
class ScaleSet:
    """Per-scene scale parameters keyed by scene id."""

    params: dict  # id -> ScaleParam

    def __post_init__(self):
        if any(not isinstance(v, ScaleParam) for v in self.params.values()):
            raise ConfigError("ScaleSet values must be ScaleParam")

    @classmethod
    def from_scales(cls, scales: dict, a: float = 1.0) -> "ScaleSet":
        return cls({k: ScaleParam(beta_for_scale(v, a), a) for k, v in scales.items()})

    @classmethod
    def constant(cls, ids, value: float = 1.0, a: float = 1.0) -> "ScaleSet":
        return cls.from_scales({i: value for i in ids}, a)

    def ids(self):
        return sorted(self.params)

    def scale(self, scene_id: str) -> float:
        return scale_from_beta(self.params[scene_id])

    def scales(self) -> dict:
        return {i: scale_from_beta(p) for i, p in self.params.items()}

    def to_payload(self) -> dict:
        return {
            i: {"beta": p.beta, "a": p.a, "scale": scale_from_beta(p)}
            for i, p in sorted(self.params.items())
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "ScaleSet":
        return cls({i: ScaleParam(v["beta"], v["a"]) for i, v in payload.items()})


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    # second-moment memory of ~100 steps; 0.999 stalls the long descent
    # here because sqrt(v) holds on to the large early gradients
    beta2: float = 0.99
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 0  # 0 = full batch
    seed: int = 0
    # a scene stops updating once its loss and gradient are both this small;
    # guards against Adam's constant-magnitude limit cycle around the optimum.
    # Thresholds sit orders of magnitude below the shallow approach tail of
    # the photometric surrogate (loss ~1e-6 while still ~0.1 log units out),
    # yet far above its floor at the planted scale (~1e-32), so they only
    # fire once the remaining log-scale error is ~1e-2 or less.
    converge_loss_tol: float = 1e-8
    converge_grad_tol: float = 1e-4

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigError(f"{name} must lie in (0,1), got {v}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True, eq=False)
class ScaleHistory:
    ids: tuple  # scene ids, column order of the snapshots
    scales: np.ndarray  # (epochs, n_scenes)
    loss: np.ndarray  # (epochs,) mean loss per epoch

    def __post_init__(self):
        if self.scales.shape != (len(self.loss), len(self.ids)):
            raise DataError("history shapes disagree")


def optimize_scales(scenes, init: ScaleSet, cfg: OptimizerConfig,
                    freeze_ids=None, loss_fn=None):
    """Adam on betas; returns (final ScaleSet, per-epoch ScaleHistory).

    scenes: objects carrying scene_id; by default each must offer
        loss_and_grad(s) -> (loss, dloss_ds), or pass loss_fn(scene, s).
    freeze_ids: ids whose parameters are never updated.
    """
    if loss_fn is None:
        loss_fn = lambda scene, s: scene.loss_and_grad(s)
    freeze_ids = set(freeze_ids or ())
    scenes = sorted(scenes, key=lambda sc: sc.scene_id)
    ids = [sc.scene_id for sc in scenes]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate scene ids")
    for i in ids:
        if i not in init.params:
            raise DataError(f"no initial scale for scene {i}")

    n = len(scenes)
    beta = np.array([init.params[i].beta for i in ids])
    a_vec = np.array([init.params[i].a for i in ids])
    m = np.zeros(n)
    v = np.zeros(n)
    step = np.zeros(n, dtype=int)
    active = np.array([i not in freeze_ids for i in ids])
    converged = np.zeros(n, dtype=bool)
    # loss is a pure function of the (now fixed) scale for frozen and
    # converged scenes, so cache it instead of re-evaluating every epoch
    held_loss = np.full(n, np.nan)

    snapshots = np.empty((cfg.epochs, n))
    losses = np.empty(cfg.epochs)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xBA7C4)))
    batch = cfg.batch_size if cfg.batch_size > 0 else n
    recorded = 0

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = np.empty(n)
        for start in range(0, n, batch):
            chunk = order[start : start + batch]
            for j in chunk:
                if not active[j] or converged[j]:
                    if np.isnan(held_loss[j]):
                        s_j = scale_from_beta(ScaleParam(beta[j], a_vec[j]))
                        held_loss[j] = loss_fn(scenes[j], s_j)[0]
                    epoch_loss[j] = held_loss[j]
                    continue
                s_j = scale_from_beta(ScaleParam(beta[j], a_vec[j]))
                loss_j, dloss_ds = loss_fn(scenes[j], s_j)
                epoch_loss[j] = loss_j
                g = dloss_ds * dscale_dbeta(ScaleParam(beta[j], a_vec[j]))
                if not np.isfinite(g):
                    raise NumericError(f"non-finite gradient for scene {ids[j]}")
                if abs(loss_j) < cfg.converge_loss_tol and abs(g) < cfg.converge_grad_tol:
                    converged[j] = True
                    held_loss[j] = loss_j
                    continue
                step[j] += 1
                m[j] = cfg.beta1 * m[j] + (1 - cfg.beta1) * g
                v[j] = cfg.beta2 * v[j] + (1 - cfg.beta2) * g * g
                m_hat = m[j] / (1 - cfg.beta1 ** step[j])
                v_hat = v[j] / (1 - cfg.beta2 ** step[j])
                beta[j] -= cfg.learning_rate * m_hat / (math.sqrt(v_hat) + cfg.epsilon)
        snapshots[epoch] = [
            scale_from_beta(ScaleParam(beta[j], a_vec[j])) for j in range(n)
        ]
        losses[epoch] = epoch_loss.mean()
        recorded = epoch + 1
        if bool(np.all(converged | ~active)):
            break

    final = ScaleSet(
        {
            ids[j]: (init.params[ids[j]] if ids[j] in freeze_ids
                     else ScaleParam(float(beta[j]), float(a_vec[j])))
            for j in range(n)
        }
    )
    history = ScaleHistory(tuple(ids), snapshots[:recorded].copy(), losses[:recorded].copy())
    return final, history


def delta_scales(history: ScaleHistory, stride: int = 10) -> np.ndarray:
    """Mean absolute log-scale change across scenes, per epoch, lagged by stride."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    e = len(history.loss)
    if e <= stride:
        raise DataError(f"history too short: {e} epochs <= stride {stride}")
    logs = np.log(history.scales)
    return np.mean(np.abs(logs[stride:] - logs[:-stride]), axis=1)


def log_scale_correlation(a: ScaleSet, b: ScaleSet) -> float:
    """Pearson correlation of log scales across the shared id set."""
    if set(a.params) != set(b.params):
        raise DataError("scale sets cover different scene ids")
    ids = sorted(a.params)
    if len(ids) < 2:
        raise DataError("need >= 2 scenes for a correlation")
    la = np.log([a.scale(i) for i in ids])
    lb = np.log([b.scale(i) for i in ids])
    if np.std(la) < 1e-15 or np.std(lb) < 1e-15:
        raise NumericError("zero variance in log scales")
    return float(np.corrcoef(la, lb)[0, 1])
