import numpy as np
import pytest

from conftest import identity_camera
from mvscale.errors import ConfigError, DataError
from mvscale.geometry import PixelMatch
from mvscale.tsed import (
    AXIS_PAIRS,
    PairVerdict,
    SsTsedCurve,
    TsedConfig,
    axis_translation_cameras,
    nominal_fundamental,
    ss_tsed_protocol,
    tsed_pair,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        TsedConfig(t_matches=0)
    with pytest.raises(ConfigError):
        TsedConfig(t_error_sweep=())
    with pytest.raises(ConfigError):
        TsedConfig(t_error_sweep=(1.0, 0.5))
    with pytest.raises(ConfigError):
        TsedConfig(t_error_sweep=(-1.0, 1.0))
    with pytest.raises(ConfigError):
        TsedConfig(translation_magnitude=0.0)
    assert TsedConfig().t_error_sweep[0] == pytest.approx(0.7)


def test_tsed_pair_median_rule():
    # line x = 0 for p2 and y = 0 for p1; distances fully controlled
    f = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cfg = TsedConfig(t_matches=2, t_error_sweep=(1.0, 3.0))

    def match(d):
        # SED = mean(d, d)
        return PixelMatch(np.array([1.0, d]), np.array([d, 1.0]))

    verdict = tsed_pair([match(0.5), match(2.0), match(6.0)], f, cfg)
    assert verdict.match_count == 3
    assert verdict.median_sed == pytest.approx(2.0)
    assert verdict.consistent_at == (False, True)


def test_tsed_pair_too_few_matches_is_negative():
    f = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cfg = TsedConfig(t_matches=10, t_error_sweep=(1.0,))
    verdict = tsed_pair([PixelMatch(np.zeros(2), np.zeros(2))], f, cfg)
    assert verdict.consistent_at == (False,)
    empty = tsed_pair([], f, cfg)
    assert empty.match_count == 0 and empty.median_sed == np.inf


def test_axis_translation_cameras_move_one_axis():
    cond = identity_camera(32)
    rng = np.random.default_rng(0)
    cam_a, cam_b = axis_translation_cameras(cond, "xz", 0.25, rng)
    da = cam_a.pose.center - cond.pose.center
    db = cam_b.pose.center - cond.pose.center
    assert abs(da[0]) == pytest.approx(0.25) and np.allclose(da[1:], 0.0)
    assert abs(db[2]) == pytest.approx(0.25) and np.allclose(db[:2], 0.0)
    assert np.allclose(cam_a.pose.rotation, cond.pose.rotation)


def test_axis_translation_cameras_rejections():
    cond = identity_camera(32)
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        axis_translation_cameras(cond, "xx", 0.5, rng)
    with pytest.raises(ConfigError):
        axis_translation_cameras(cond, "xq", 0.5, rng)
    with pytest.raises(ConfigError):
        axis_translation_cameras(cond, "xyz", 0.5, rng)
    with pytest.raises(ConfigError):
        axis_translation_cameras(cond, "xy", 0.0, rng)


def _perfect_sampler(points):
    """Exact correspondences of fixed world points, no scale noise."""

    def sampler(scene, cond, nom_a, nom_b, rng):
        from mvscale.geometry import project

        out = []
        for p in points:
            p1 = project(p, nom_a)
            p2 = project(p, nom_b)
            if p1 is not None and p2 is not None:
                out.append(PixelMatch(p1, p2))
        return out

    return sampler


def test_protocol_perfect_matches_are_consistent_everywhere():
    cond = identity_camera(32)
    pts = np.random.default_rng(5).uniform(-0.5, 0.5, size=(30, 3))
    pts[:, 2] += 3.0
    cfg = TsedConfig(t_matches=10, t_error_sweep=(0.01, 0.1, 1.0))
    curve = ss_tsed_protocol([(None, cond)], _perfect_sampler(pts), cfg,
                             pairs_per_image=6, rng_seed=1)
    assert isinstance(curve, SsTsedCurve)
    assert curve.pair_count == 6 and curve.skip_count == 0
    assert np.allclose(curve.pct_overall, 100.0)
    for pair in AXIS_PAIRS:
        by_axis = curve.pct_by_axis[pair]
        assert np.all(np.isnan(by_axis)) or np.allclose(by_axis, 100.0)


def test_protocol_threads_match_serial():
    cond = identity_camera(32)
    pts = np.random.default_rng(6).uniform(-0.5, 0.5, size=(25, 3))
    pts[:, 2] += 3.0
    cfg = TsedConfig(t_matches=5, t_error_sweep=(0.5, 1.0))
    args = ([(None, cond)], _perfect_sampler(pts), cfg)
    one = ss_tsed_protocol(*args, pairs_per_image=5, rng_seed=9, threads=1)
    three = ss_tsed_protocol(*args, pairs_per_image=5, rng_seed=9, threads=3)
    assert np.array_equal(one.pct_overall, three.pct_overall)
    assert one.pair_count == three.pair_count


def test_protocol_tallies_sampler_skips():
    cond = identity_camera(32)

    calls = {"n": 0}

    def flaky(scene, c, a, b, rng):
        calls["n"] += 1
        if calls["n"] % 2 == 0:
            raise DataError("no co-visible geometry")
        return [PixelMatch(np.zeros(2), np.zeros(2))] * 12

    cfg = TsedConfig(t_matches=10, t_error_sweep=(1.0,))
    curve = ss_tsed_protocol([(None, cond)], flaky, cfg, pairs_per_image=4,
                             rng_seed=0)
    assert curve.skip_count == 2 and curve.pair_count == 2

    def always(scene, c, a, b, rng):
        raise DataError("nothing")

    with pytest.raises(DataError):
        ss_tsed_protocol([(None, cond)], always, cfg, pairs_per_image=2)
    with pytest.raises(ConfigError):
        ss_tsed_protocol([(None, cond)], flaky, cfg, pairs_per_image=0)


def test_nominal_fundamental_scores_true_points():
    cond = identity_camera(32)
    rng = np.random.default_rng(3)
    cam_a, cam_b = axis_translation_cameras(cond, "xy", 0.3, rng)
    f = nominal_fundamental(cam_a, cam_b)
    pts = rng.uniform(-0.4, 0.4, size=(20, 3))
    pts[:, 2] += 2.5
    from mvscale.geometry import project, symmetric_epipolar_distance

    for p in pts:
        p1, p2 = project(p, cam_a), project(p, cam_b)
        if p1 is None or p2 is None:
            continue
        assert symmetric_epipolar_distance(f, PixelMatch(p1, p2)) < 1e-9
