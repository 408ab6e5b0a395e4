"""Scene-scale ambiguity toolkit for multi-view data.

Quantifies the scale variability of generated novel views (SFC, SS-TSED),
learns per-scene scale corrections with a clamped log-space parameterization
under per-parameter Adam, and calibrates reconstruction scales against
metric monocular depth. A deterministic synthetic multi-view oracle with
planted ground-truth scales backs all of it.
"""

from .errors import ConfigError, DataError, MvScaleError, NumericError
from .geometry import (
    Camera,
    Intrinsics,
    PixelMatch,
    Pose,
    compose,
    essential_matrix,
    fundamental_matrix,
    project,
    project_points,
    relative_pose,
    scale_translation,
    symmetric_epipolar_distance,
)
from .flow_metrics import (
    MaskConfig,
    SfcResult,
    bilinear_sample,
    consensus_mask,
    edge_heatmap,
    fb_consistency_mask,
    mad_map,
    normalize_flows,
    sfc,
    sfc_pipeline,
)
from .tsed import SsTsedCurve, TsedConfig, ss_tsed_protocol, tsed_pair
from .scale_opt import (
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
from .depth_calib import (
    CalibrationPolicy,
    SceneCalibration,
    apply_policy,
    fit_scene_scale,
    reliability_partition,
)

__version__ = "0.1.0"
