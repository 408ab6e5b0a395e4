import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvscale.errors import ConfigError, DataError, NumericError
from mvscale.flow_metrics import (
    MaskConfig,
    bilinear_sample,
    bilinear_sample_many,
    consensus_mask,
    edge_heatmap,
    fb_consistency_mask,
    mad_map,
    normalize_flows,
    sfc,
    sfc_pipeline,
)


def const_flow(h, w, vx, vy=0.0):
    f = np.zeros((h, w, 2))
    f[..., 0] = vx
    f[..., 1] = vy
    return f


def test_mask_config_validation():
    with pytest.raises(ConfigError):
        MaskConfig(threshold_t=0.0)
    with pytest.raises(ConfigError):
        MaskConfig(consensus_epsilon=1.0)


def test_bilinear_sample_interpolates():
    flow = np.zeros((2, 2, 2))
    flow[0, 0, 0] = 1.0
    flow[0, 1, 0] = 3.0
    flow[1, 0, 0] = 5.0
    flow[1, 1, 0] = 7.0
    assert bilinear_sample(flow, (0.5, 0.0))[0] == pytest.approx(2.0)
    assert bilinear_sample(flow, (0.0, 0.5))[0] == pytest.approx(3.0)
    assert bilinear_sample(flow, (0.5, 0.5))[0] == pytest.approx(4.0)
    assert bilinear_sample(flow, (1.0, 1.0))[0] == pytest.approx(7.0)
    assert bilinear_sample(flow, (-0.1, 0.0)) is None
    assert bilinear_sample(flow, (0.0, 1.2)) is None


def test_bilinear_sample_many_flags_out_of_bounds():
    flow = const_flow(3, 3, 2.0)
    pts = np.array([[1.0, 1.0], [2.0, 2.0], [2.1, 1.0], [0.0, -0.5]])
    vals, ok = bilinear_sample_many(flow, pts)
    assert ok.tolist() == [True, True, False, False]
    assert np.allclose(vals[:2, 0], 2.0)
    assert np.all(np.isnan(vals[2:]))


def test_fb_mask_consistent_pair_inside_grid():
    fwd = const_flow(4, 4, 1.0)
    bwd = const_flow(4, 4, -1.0)
    mask = fb_consistency_mask(fwd, bwd)
    # x = 3 maps to x = 4, off the grid; everything else cycles exactly
    assert mask[:, :3].all()
    assert not mask[:, 3].any()


def test_fb_mask_threshold_cuts_inconsistency():
    fwd = const_flow(4, 4, 1.0)
    bwd = const_flow(4, 4, -3.0)  # residual (-2, 0)
    assert not fb_consistency_mask(fwd, bwd).any()
    loose = MaskConfig(threshold_t=2.0)
    assert fb_consistency_mask(fwd, bwd, loose)[:, :3].all()


def test_fb_mask_literal_subtraction_variant():
    fwd = const_flow(4, 4, 1.0)
    bwd = const_flow(4, 4, -1.0)
    cfg = MaskConfig(literal_subtraction=True)
    # a perfectly consistent pair scores |f - (-f)| = 2|f| under subtraction
    assert not fb_consistency_mask(fwd, bwd, cfg).any()
    cfg = MaskConfig(threshold_t=2.0, literal_subtraction=True)
    assert fb_consistency_mask(fwd, bwd, cfg)[:, :3].all()


def test_consensus_mask_strict_majority():
    masks = np.zeros((3, 1, 4), dtype=bool)
    masks[0, 0, :] = [True, True, True, False]
    masks[1, 0, :] = [True, True, False, False]
    masks[2, 0, :] = [True, False, False, False]
    out = consensus_mask(masks, epsilon=0.5)
    assert out[0].tolist() == [True, True, False, False]
    # 1/3 never exceeds 0.5; 2/3 does
    with pytest.raises(ConfigError):
        consensus_mask(masks, epsilon=0.0)
    with pytest.raises(DataError):
        consensus_mask(np.zeros((2, 2), dtype=bool))


def test_normalize_flows_hand_values():
    flows = [const_flow(2, 2, 1.0), const_flow(2, 2, 3.0)]
    masks = np.ones((2, 2, 2), dtype=bool)
    normalized, f_bar = normalize_flows(flows, masks)
    assert f_bar == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(normalized[0, ..., 0], 0.5, atol=1e-12)
    assert np.allclose(normalized[1, ..., 0], 1.5, atol=1e-12)


def test_normalize_flows_error_paths():
    flows = [const_flow(2, 2, 1.0), const_flow(2, 2, 1.0)]
    with pytest.raises(DataError):
        normalize_flows(flows, np.zeros((2, 2, 2), dtype=bool))
    zero = [const_flow(2, 2, 0.0), const_flow(2, 2, 0.0)]
    with pytest.raises(NumericError):
        normalize_flows(zero, np.ones((2, 2, 2), dtype=bool))


def test_mad_map_even_and_odd_counts():
    flows = np.stack([const_flow(1, 1, v) for v in (1.0, 2.0, 6.0)])
    masks = np.ones((3, 1, 1), dtype=bool)
    # devs from the mean 3: 2, 1, 3 -> median 2
    assert mad_map(flows, masks)[0, 0] == pytest.approx(2.0)
    # drop the last sample: devs from 1.5 are 0.5, 0.5 -> median 0.5
    masks[2] = False
    assert mad_map(flows, masks)[0, 0] == pytest.approx(0.5)


def test_mad_map_needs_two_contributors_per_pixel():
    flows = np.stack([const_flow(1, 3, v) for v in (1.0, 2.0)])
    masks = np.ones((2, 1, 3), dtype=bool)
    masks[0, 0, 1] = False  # one contributor
    masks[:, 0, 2] = False  # zero contributors
    out = mad_map(flows, masks)
    assert np.isfinite(out[0, 0])
    assert np.isnan(out[0, 1]) and np.isnan(out[0, 2])


def test_sfc_median_and_support():
    mad = np.array([[0.1, 0.3, np.nan], [0.5, 0.2, 0.4]])
    m_star = np.array([[True, True, True], [False, True, False]])
    # support = finite & m_star -> {0.1, 0.3, 0.2}
    assert sfc(mad, m_star) == pytest.approx(0.2)
    with pytest.raises(DataError):
        sfc(mad, np.zeros_like(m_star))


def test_full_mask_hand_oracle():
    """Constant flows (1,0) and (3,0) under full masks: f_bar 2, deviation 0.5."""
    flows = [const_flow(4, 4, 1.0), const_flow(4, 4, 3.0)]
    full = np.ones((2, 4, 4), dtype=bool)
    normalized, f_bar = normalize_flows(flows, full)
    assert abs(f_bar - 2.0) < 1e-12
    value = sfc(mad_map(normalized, full), np.ones((4, 4), dtype=bool))
    assert abs(value - 0.5) < 1e-12


def test_sfc_pipeline_end_to_end():
    pairs = [
        (const_flow(4, 4, 1.0), const_flow(4, 4, -1.0)),
        (const_flow(4, 4, 3.0), const_flow(4, 4, -3.0)),
    ]
    res = sfc_pipeline(pairs)
    # the wide flow leaves the grid except in column 0, so its cycle mask
    # covers 4 pixels against 12 for the narrow one
    assert res.mean_flow_magnitude == pytest.approx((12 * 1 + 4 * 3) / 16)
    assert res.sfc == pytest.approx(2.0 / 3.0)
    assert res.mask_source == "consensus"
    assert res.sample_count == 2
    assert res.m_star[:, 0].all() and not res.m_star[:, 1:].any()


def test_sfc_pipeline_gt_mask_source():
    pairs = [
        (const_flow(4, 4, 1.0), const_flow(4, 4, -1.0)),
        (const_flow(4, 4, 2.0), const_flow(4, 4, -2.0)),
    ]
    gt = (const_flow(4, 4, 1.0), const_flow(4, 4, -1.0))
    res = sfc_pipeline(pairs, gt_flow_pair=gt)
    assert res.mask_source == "ground-truth"
    assert res.m_star[:, :3].all() and not res.m_star[:, 3].any()
    with pytest.raises(DataError):
        sfc_pipeline(pairs[:1])


@settings(deadline=None, max_examples=30)
@given(c=st.floats(0.01, 100.0))
def test_sfc_invariant_to_global_flow_scale(c):
    """Rescaling every sample flow by one factor cancels in the normalization."""
    rng = np.random.default_rng(7)
    flows = rng.normal(1.0, 0.2, size=(4, 6, 6, 2))
    masks = rng.random((4, 6, 6)) < 0.9
    masks[:2] = True  # keep >= 2 contributors everywhere
    m_star = np.ones((6, 6), dtype=bool)

    def value(fl):
        normalized, _ = normalize_flows(list(fl), masks)
        return sfc(mad_map(normalized, masks), m_star)

    assert value(flows * c) == pytest.approx(value(flows), abs=1e-12)


def test_edge_heatmap_peaks_on_the_edge():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    heat = edge_heatmap([img, img])
    assert heat.max() == pytest.approx(1.0)
    assert heat[:, 3:5].min() == pytest.approx(1.0)  # columns touching the step
    assert heat[:, 0].max() == 0.0
    assert edge_heatmap([np.zeros((4, 4))]).max() == 0.0  # flat stays flat
    with pytest.raises(DataError):
        edge_heatmap([])
    with pytest.raises(DataError):
        edge_heatmap([np.zeros((2, 2, 3))])


def test_flow_validation_errors():
    with pytest.raises(DataError):
        fb_consistency_mask(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)))
    bad = const_flow(2, 2, np.inf)
    with pytest.raises(DataError):
        fb_consistency_mask(bad, bad)
    with pytest.raises(DataError):
        fb_consistency_mask(const_flow(2, 2, 1.0), const_flow(3, 3, 1.0))
