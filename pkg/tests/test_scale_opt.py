import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvscale.errors import ConfigError, DataError, NumericError
from mvscale.scale_opt import (
    OptimizerConfig,
    ScaleHistory,
    ScaleParam,
    ScaleSet,
    beta_for_scale,
    delta_scales,
    dscale_dbeta,
    log_scale_correlation,
    optimize_scales,
    scale_from_beta,
)


class QuadraticScene:
    """loss = (s - s_star)^2, the simplest convex stand-in."""

    def __init__(self, scene_id, s_star):
        self.scene_id = scene_id
        self.s_star = s_star

    def loss_and_grad(self, s):
        return (s - self.s_star) ** 2, 2.0 * (s - self.s_star)


# ------------------------------------------------------------- parameter


def test_scale_of_zero_beta_is_one():
    assert scale_from_beta(ScaleParam(0.0)) == 1.0
    assert scale_from_beta(ScaleParam(0.0, a=2.5)) == 1.0


@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_clamp_saturates_at_exp_a(a):
    assert scale_from_beta(ScaleParam(1.0, a)) == pytest.approx(math.exp(a))
    assert scale_from_beta(ScaleParam(-1.0, a)) == pytest.approx(math.exp(-a))
    assert scale_from_beta(ScaleParam(7.0, a)) == scale_from_beta(ScaleParam(1.0, a))
    assert scale_from_beta(ScaleParam(-9.0, a)) == scale_from_beta(ScaleParam(-1.0, a))


def test_gradient_zero_outside_clamp_and_onesided_at_edge():
    assert dscale_dbeta(ScaleParam(1.5)) == 0.0
    assert dscale_dbeta(ScaleParam(-1.01)) == 0.0
    assert dscale_dbeta(ScaleParam(1.0)) == pytest.approx(math.e)
    assert dscale_dbeta(ScaleParam(-1.0)) == pytest.approx(1.0 / math.e)


@settings(deadline=None, max_examples=100)
@given(beta=st.floats(-0.999, 0.999), a=st.floats(0.1, 3.0))
def test_gradient_matches_finite_differences(beta, a):
    h = 1e-7
    lo = scale_from_beta(ScaleParam(max(beta - h, -1.0), a))
    hi = scale_from_beta(ScaleParam(min(beta + h, 1.0), a))
    fd = (hi - lo) / ((min(beta + h, 1.0)) - max(beta - h, -1.0))
    assert dscale_dbeta(ScaleParam(beta, a)) == pytest.approx(fd, rel=1e-5)


def test_beta_for_scale_inverts_in_range():
    for s in (0.5, 1.0, 2.0):
        assert scale_from_beta(ScaleParam(beta_for_scale(s))) == pytest.approx(s)
    # out-of-range scales clamp to the representable boundary
    assert beta_for_scale(100.0) == 1.0
    assert beta_for_scale(1e-9) == -1.0
    assert beta_for_scale(10.0, a=3.0) == pytest.approx(math.log(10) / 3)
    with pytest.raises(ConfigError):
        beta_for_scale(0.0)
    with pytest.raises(ConfigError):
        ScaleParam(0.0, a=0.0)


def test_scale_set_payload_round_trip():
    ss = ScaleSet.from_scales({"b": 2.0, "a": 0.7}, a=1.5)
    assert ss.ids() == ["a", "b"]
    assert ss.scale("b") == pytest.approx(2.0)
    payload = ss.to_payload()
    assert payload["a"]["scale"] == pytest.approx(0.7)
    back = ScaleSet.from_payload(payload)
    assert back.scales() == ss.scales()
    assert ScaleSet.constant(["x", "y"], 1.0).scales() == {"x": 1.0, "y": 1.0}
    with pytest.raises(ConfigError):
        ScaleSet({"x": 1.0})


# ------------------------------------------------------------- optimizer


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(beta1=1.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(beta2=0.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(epochs=0)


def test_optimizer_recovers_quadratic_minima():
    scenes = [QuadraticScene(f"s{i}", s) for i, s in enumerate((0.6, 1.0, 1.9))]
    init = ScaleSet.constant([s.scene_id for s in scenes], 1.0)
    cfg = OptimizerConfig(learning_rate=3e-3, epochs=4000,
                          converge_loss_tol=1e-14, converge_grad_tol=1e-7)
    final, history = optimize_scales(scenes, init, cfg)
    for sc in scenes:
        assert final.scale(sc.scene_id) == pytest.approx(sc.s_star, abs=1e-3)
    assert history.loss[-1] < history.loss[0]
    assert history.scales.shape[1] == 3


def test_optimizer_freeze_ids_hold_still():
    scenes = [QuadraticScene("a", 2.0), QuadraticScene("b", 0.5)]
    init = ScaleSet.constant(["a", "b"], 1.0)
    cfg = OptimizerConfig(learning_rate=1e-2, epochs=200)
    final, history = optimize_scales(scenes, init, cfg, freeze_ids={"a"})
    assert final.scale("a") == 1.0
    assert np.all(history.scales[:, history.ids.index("a")] == 1.0)
    assert final.scale("b") != 1.0


def test_optimizer_is_deterministic():
    scenes = [QuadraticScene(f"s{i}", 0.8 + 0.2 * i) for i in range(4)]
    init = ScaleSet.constant([s.scene_id for s in scenes], 1.0)
    cfg = OptimizerConfig(learning_rate=5e-3, epochs=300, batch_size=2, seed=5)
    f1, h1 = optimize_scales(scenes, init, cfg)
    f2, h2 = optimize_scales(scenes, init, cfg)
    assert f1.scales() == f2.scales()
    assert np.array_equal(h1.scales, h2.scales)
    assert np.array_equal(h1.loss, h2.loss)


def test_optimizer_early_stop_on_convergence():
    scenes = [QuadraticScene("only", 1.0)]
    init = ScaleSet.constant(["only"], 1.0)  # starts at the optimum
    cfg = OptimizerConfig(learning_rate=1e-3, epochs=500)
    final, history = optimize_scales(scenes, init, cfg)
    assert len(history.loss) == 1  # converged on the first epoch
    assert final.scale("only") == 1.0


def test_optimizer_custom_loss_fn_and_errors():
    scenes = [QuadraticScene("a", 1.2), QuadraticScene("b", 1.4)]
    init = ScaleSet.constant(["a", "b"], 1.0)
    cfg = OptimizerConfig(learning_rate=1e-2, epochs=50)
    target = {"a": 1.2, "b": 1.4}

    def fn(scene, s):
        d = s - target[scene.scene_id]
        return d * d, 2 * d

    final, _ = optimize_scales(scenes, init, cfg, loss_fn=fn)
    assert final.scale("a") < final.scale("b")

    with pytest.raises(DataError):
        optimize_scales([QuadraticScene("a", 1.0), QuadraticScene("a", 1.0)],
                        init, cfg)
    with pytest.raises(DataError):
        optimize_scales(scenes, ScaleSet.constant(["a"], 1.0), cfg)

    def bad(scene, s):
        return 1.0, float("nan")

    with pytest.raises(NumericError):
        optimize_scales(scenes, init, cfg, loss_fn=bad)


# --------------------------------------------------------------- history


def test_delta_scales_lagged_log_change():
    ids = ("a", "b")
    scales = np.array([[1.0, 1.0], [1.0, 2.0], [4.0, 2.0]])
    loss = np.zeros(3)
    hist = ScaleHistory(ids, scales, loss)
    out = delta_scales(hist, stride=1)
    # epoch 1: |log1-log1| and |log2-log1| -> mean log(2)/2
    assert out[0] == pytest.approx(math.log(2.0) / 2)
    assert out[1] == pytest.approx((math.log(4.0) + 0.0) / 2)
    with pytest.raises(ConfigError):
        delta_scales(hist, stride=0)
    with pytest.raises(DataError):
        delta_scales(hist, stride=3)


def test_log_scale_correlation():
    a = ScaleSet.from_scales({"x": 1.0, "y": 2.0, "z": 0.5})
    b = ScaleSet.from_scales({"x": 1.1, "y": 2.3, "z": 0.6})
    assert log_scale_correlation(a, b) > 0.99
    anti = ScaleSet.from_scales({"x": 2.0, "y": 0.9, "z": 1.9})
    assert log_scale_correlation(a, anti) < 0
    with pytest.raises(DataError):
        log_scale_correlation(a, ScaleSet.from_scales({"x": 1.0}))
    with pytest.raises(DataError):
        log_scale_correlation(ScaleSet.from_scales({"x": 1.0}),
                              ScaleSet.from_scales({"x": 1.0}))
    flat = ScaleSet.from_scales({"x": 1.0, "y": 1.0, "z": 1.0})
    with pytest.raises(NumericError):
        log_scale_correlation(a, flat)
