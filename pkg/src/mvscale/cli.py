"""Command-line batch front-end.

Wires the library into the evaluation protocols and writes CSV/JSON/PNG
reports. Option resolution: built-in defaults, overridden by a --config
JSON file, overridden by explicit flags. Every command is deterministic
given --seed and its inputs; --threads changes wall time only. Exit codes:
0 ok, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataio import (
    format_float,
    read_gray_png,
    read_json_report,
    to_uint8,
    write_csv,
    write_gray_png,
    write_json_report,
)
from .depth_calib import (
    CalibrationPolicy,
    apply_policy,
    fit_scene_scale,
    read_depth_pairs_csv,
    reliability_partition,
)
from .errors import ConfigError, DataError, NumericError
from .flow_metrics import MaskConfig, edge_heatmap
from .pipelines import (
    ProtocolConfig,
    mean_sfc,
    mean_sfc_by_magnitude,
    nearest_pose_index,
    recovery_problems,
    run_ss_tsed,
    sample_heatmap,
    sfc_protocol,
)
from .scale_opt import (
    OptimizerConfig,
    ScaleSet,
    delta_scales,
    log_scale_correlation,
    optimize_scales,
)
from .synth import DatasetBundle, DatasetConfig, GeneratorSim, generate_dataset
from .tsed import TsedConfig


def _float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}")


def _load_views(cfg):
    bundle = DatasetBundle(cfg["data"])
    return bundle, [bundle.scene_data(i) for i in range(len(bundle.scene_ids))]


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(value):
    """Replace non-finite floats so reports stay strict JSON."""
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _report_config(cfg, **overrides) -> dict:
    """Analysis options for report payloads.

    Drops run plumbing (output path, worker count) so the same analysis
    writes byte-identical reports wherever and however it executes.
    """
    out = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    out.update(overrides)
    return out


# ---------------------------------------------------------------- commands

SYNTH_GEN_DEFAULTS = {
    "out": None,
    "scenes": 4,
    "image_size": 128,
    "seed": 0,
    "traj_steps": 12,
    "min_patches": 3,
    "max_patches": 8,
    "log_scale_low": -1.0,
    "log_scale_high": 1.0,
    "threads": 1,
}


def cmd_synth_gen(cfg):
    ds = DatasetConfig(
        scenes=int(cfg["scenes"]),
        image_size=int(cfg["image_size"]),
        seed=int(cfg["seed"]),
        traj_steps=int(cfg["traj_steps"]),
        min_patches=int(cfg["min_patches"]),
        max_patches=int(cfg["max_patches"]),
        log_scale_low=float(cfg["log_scale_low"]),
        log_scale_high=float(cfg["log_scale_high"]),
    )
    manifest = generate_dataset(cfg["out"], ds)
    print(f"wrote {len(manifest['scene_ids'])} scenes to {cfg['out']}")


SFC_DEFAULTS = {
    "data": None,
    "out": None,
    "seed": 0,
    "threads": 1,
    "sigma": 0.3,
    "samples_per_view": 10,
    "images_per_eval": 200,
    "magnitudes": "0.05,0.1,0.15,0.2,0.25,0.3",
    "mask": "ground-truth",
    "threshold_t": 1.5,
    "consensus_epsilon": 0.5,
    "heatmaps": True,
}


def cmd_sfc(cfg):
    if cfg["mask"] not in ("ground-truth", "consensus"):
        raise ConfigError(f"mask must be ground-truth or consensus, got {cfg['mask']!r}")
    _, views = _load_views(cfg)
    gen = GeneratorSim(scale_noise_sigma=float(cfg["sigma"]), seed=int(cfg["seed"]))
    proto = ProtocolConfig(
        magnitudes=_float_list(cfg["magnitudes"]),
        images_per_eval=int(cfg["images_per_eval"]),
        samples_per_view=int(cfg["samples_per_view"]),
        seed=int(cfg["seed"]),
    )
    mask_cfg = MaskConfig(
        threshold_t=float(cfg["threshold_t"]),
        consensus_epsilon=float(cfg["consensus_epsilon"]),
    )
    rows = sfc_protocol(
        views, gen, proto, cfg=mask_cfg,
        use_gt_mask=cfg["mask"] == "ground-truth", threads=int(cfg["threads"]),
    )
    out = _out_dir(cfg)
    by_mag = mean_sfc_by_magnitude(rows)
    write_csv(
        out / "sfc_summary.csv",
        ["translation_magnitude", "mean_sfc", "scene_count"],
        [(m, v, sum(1 for r in rows if r.magnitude == m)) for m, v in by_mag.items()],
    )
    write_csv(
        out / "sfc_detail.csv",
        ["scene", "translation_magnitude", "n", "sfc", "f_bar", "mask_source"],
        [
            (r.scene_id, r.magnitude, r.result.sample_count, r.result.sfc,
             r.result.mean_flow_magnitude, r.result.mask_source)
            for r in rows
        ],
    )
    if cfg["heatmaps"]:
        mad_dir = out / "mad"
        mad_dir.mkdir(exist_ok=True)
        mags = proto.magnitudes
        for r in rows:
            mi = mags.index(r.magnitude)
            mad = np.nan_to_num(r.result.mad, nan=0.0)
            peak = mad.max()
            if peak > 0:
                mad = mad / peak
            write_gray_png(mad_dir / f"{r.scene_id}-m{mi:02d}.png", to_uint8(mad))
    write_json_report(out / "sfc_report.json", _jsonable({
        "command": "sfc",
        "config": _report_config(cfg, magnitudes=list(proto.magnitudes)),
        "mean_sfc": mean_sfc(rows),
        "by_magnitude": {format_float(m): v for m, v in by_mag.items()},
    }))
    print(f"sfc report in {out}: mean SFC {format_float(mean_sfc(rows))}")


SS_TSED_DEFAULTS = {
    "data": None,
    "out": None,
    "seed": 0,
    "threads": 1,
    "sigma": 0.3,
    "pairs_per_image": 100,
    "images_per_eval": 200,
    "matches_per_pair": 200,
    "t_matches": 10,
    "translation_magnitude": 0.2,
}


def cmd_ss_tsed(cfg):
    _, views = _load_views(cfg)
    gen = GeneratorSim(scale_noise_sigma=float(cfg["sigma"]), seed=int(cfg["seed"]))
    proto = ProtocolConfig(
        pairs_per_image=int(cfg["pairs_per_image"]),
        images_per_eval=int(cfg["images_per_eval"]),
        seed=int(cfg["seed"]),
    )
    tsed_cfg = TsedConfig(
        t_matches=int(cfg["t_matches"]),
        translation_magnitude=float(cfg["translation_magnitude"]),
        matches_per_pair=int(cfg["matches_per_pair"]),
    )
    curve = run_ss_tsed(views, gen, tsed_cfg, proto, threads=int(cfg["threads"]))
    out = _out_dir(cfg)
    header = ["threshold_px", "pct_overall", "pct_xy", "pct_xz", "pct_yz"]
    rows = [
        (t, curve.pct_overall[i], curve.pct_by_axis["xy"][i],
         curve.pct_by_axis["xz"][i], curve.pct_by_axis["yz"][i])
        for i, t in enumerate(curve.sweep)
    ]
    write_csv(out / "ss_tsed.csv", header, rows)
    write_json_report(out / "ss_tsed_report.json", _jsonable({
        "command": "ss-tsed",
        "config": _report_config(cfg),
        "sweep": list(curve.sweep),
        "pct_overall": [float(v) for v in curve.pct_overall],
        "pct_by_axis": {k: [float(v) for v in vals]
                        for k, vals in curve.pct_by_axis.items()},
        "pair_count": curve.pair_count,
        "skip_count": curve.skip_count,
    }))
    print(f"ss-tsed report in {out}: {curve.pair_count} pairs, "
          f"{curve.skip_count} skipped")


SCALE_LEARN_DEFAULTS = {
    "data": None,
    "out": None,
    "seed": 0,
    "threads": 1,
    "epochs": 4000,
    "learning_rate": 1e-4,
    "batch_size": 0,
    "max_pixels": 192,
    "magnitudes": "0.05,0.1,0.15",
    "reference": "",
    "freeze": "",
    "compare": "",
    "delta_stride": 10,
}


def _load_reference(path) -> ScaleSet:
    doc = read_json_report(path)
    scales = doc.get("scales", doc.get("scale_map"))
    if not isinstance(scales, dict) or not scales:
        raise DataError(f"no scales found in {path}")
    sample = next(iter(scales.values()))
    if isinstance(sample, dict):
        return ScaleSet.from_payload(scales)
    return ScaleSet.from_scales({k: float(v) for k, v in scales.items()})


def cmd_scale_learn(cfg):
    bundle, views = _load_views(cfg)
    problems, _ = recovery_problems(
        views, magnitudes=_float_list(cfg["magnitudes"]),
        max_pixels=int(cfg["max_pixels"]) or None, seed=int(cfg["seed"]),
        threads=int(cfg["threads"]),
    )
    all_ids = sorted(p.scene_id for p in problems)
    if cfg["reference"]:
        reference = _load_reference(cfg["reference"])
        # scenes absent from the reference were trimmed upstream; skip them
        problems = [p for p in problems if p.scene_id in reference.params]
        if not problems:
            raise DataError("reference scales cover none of the dataset scenes")
    else:
        reference = ScaleSet.constant(all_ids, 1.0)
    skipped = sorted(set(all_ids) - {p.scene_id for p in problems})

    if cfg["freeze"] == "all":
        freeze_ids = [p.scene_id for p in problems]
    elif cfg["freeze"]:
        freeze_ids = [s for s in str(cfg["freeze"]).split(",") if s]
        unknown = set(freeze_ids) - set(all_ids)
        if unknown:
            raise ConfigError(f"unknown scene ids in --freeze: {sorted(unknown)}")
    else:
        freeze_ids = []

    opt = OptimizerConfig(
        learning_rate=float(cfg["learning_rate"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        seed=int(cfg["seed"]),
    )
    final, history = optimize_scales(problems, reference, opt, freeze_ids=freeze_ids)

    out = _out_dir(cfg)
    write_csv(
        out / "history.csv",
        ["epoch", "mean_loss"] + list(history.ids),
        [(e, history.loss[e], *history.scales[e]) for e in range(len(history.loss))],
    )
    stride = int(cfg["delta_stride"])
    summary = {
        "epochs_recorded": len(history.loss),
        "final_mean_loss": float(history.loss[-1]),
        "scenes": len(problems),
        "skipped_scenes": skipped,
    }
    if len(history.loss) > stride:
        delta = delta_scales(history, stride=stride)
        write_csv(
            out / "delta_scales.csv",
            ["epoch", "mean_abs_log_delta"],
            [(stride + i, d) for i, d in enumerate(delta)],
        )
        summary["delta_max"] = float(delta.max())
        summary["delta_final"] = float(delta[-1])
        if delta.max() > 0:
            summary["delta_final_over_max"] = float(delta[-1] / delta.max())
    try:
        planted = bundle.planted_scales()
        errs = [abs(np.log(final.scale(i) / planted[i])) for i in final.params
                if i in planted]
        if errs:
            summary["max_abs_log_error_vs_planted"] = float(max(errs))
    except FileNotFoundError:
        pass
    if cfg["compare"]:
        other = _load_reference(cfg["compare"])
        shared = sorted(set(final.params) & set(other.params))
        if len(shared) >= 2:
            a = ScaleSet({i: final.params[i] for i in shared})
            b = ScaleSet({i: other.params[i] for i in shared})
            summary["log_scale_correlation"] = log_scale_correlation(a, b)
    write_json_report(out / "scales.json", _jsonable({
        "command": "scale-learn",
        "config": _report_config(cfg),
        "scales": final.to_payload(),
        "summary": summary,
    }))
    print(f"scale-learn report in {out}: {len(problems)} scenes, "
          f"{summary['epochs_recorded']} epochs")


CALIBRATE_DEFAULTS = {
    "pairs": None,
    "out": None,
    "seed": 0,
    "threads": 1,
    "unreliable_fraction": 0.30,
    "policy": "fallback-one",
    "log_space": False,
}


def cmd_calibrate(cfg):
    pairs_dir = Path(cfg["pairs"])
    files = sorted(pairs_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no depth-pair CSV files under {pairs_dir}")
    calibs = [
        fit_scene_scale(read_depth_pairs_csv(f.read_text()), scene_id=f.stem,
                        log_space=bool(cfg["log_space"]))
        for f in files
    ]
    policy = CalibrationPolicy(
        mode=str(cfg["policy"]).replace("-", "_"),
        unreliable_fraction=float(cfg["unreliable_fraction"]),
    )
    flagged = reliability_partition(calibs, policy.unreliable_fraction)
    scale_map, retained = apply_policy(flagged, policy)
    out = _out_dir(cfg)
    write_csv(
        out / "scale_map.csv",
        ["scene", "scale", "reliable", "retained"],
        [(c.scene_id, scale_map.get(c.scene_id, ""), c.reliable,
          c.scene_id in retained) for c in flagged],
    )
    write_json_report(out / "calibration.json", _jsonable({
        "command": "calibrate",
        "config": _report_config(cfg),
        "scenes": [
            {"scene_id": c.scene_id, "alpha": c.alpha,
             "residual_variance": c.residual_variance,
             "sample_count": c.sample_count, "reliable": c.reliable}
            for c in flagged
        ],
        "scale_map": scale_map,
        "retained": sorted(retained),
    }))
    print(f"calibrate report in {out}: {len(retained)}/{len(flagged)} scenes retained")


EDGE_HEATMAP_DEFAULTS = {
    "out": None,
    "data": "",
    "images": "",
    "seed": 0,
    "threads": 1,
    "sigma": 0.3,
    "samples_per_view": 10,
    "magnitude": 0.2,
}


def cmd_edge_heatmap(cfg):
    out = _out_dir(cfg)
    written = []
    if cfg["images"]:
        paths = [p for p in str(cfg["images"]).split(",") if p]
        imgs = [read_gray_png(p).astype(float) for p in paths]
        heat = edge_heatmap(imgs)
        write_gray_png(out / "heatmap.png", to_uint8(heat))
        written.append("heatmap.png")
    elif cfg["data"]:
        _, views = _load_views(cfg)
        gen = GeneratorSim(scale_noise_sigma=float(cfg["sigma"]),
                           seed=int(cfg["seed"]))
        for view in views:
            ti = nearest_pose_index(view.cond, view.targets, float(cfg["magnitude"]))
            heat = sample_heatmap(view.scene, view.cond, view.targets[ti], gen,
                                  int(cfg["samples_per_view"]))
            name = f"{view.scene.scene_id}.png"
            write_gray_png(out / name, to_uint8(heat))
            written.append(name)
    else:
        raise ConfigError("edge-heatmap needs --images or --data")
    write_json_report(out / "edge_heatmap_report.json", _jsonable({
        "command": "edge-heatmap",
        "config": _report_config(cfg),
        "outputs": written,
    }))
    print(f"wrote {len(written)} heatmap(s) to {out}")


# ----------------------------------------------------------------- wiring


def _resolve(defaults: dict, ns: argparse.Namespace) -> dict:
    """defaults < --config file < explicit flags."""
    cfg = dict(defaults)
    given = {k: v for k, v in vars(ns).items() if k in defaults}
    config_path = getattr(ns, "config", None)
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise DataError(f"config file not found: {config_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_path} is not valid JSON: {e}")
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        unknown = set(doc) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    cfg.update(given)
    missing = [k for k, v in cfg.items() if v is None]
    if missing:
        raise ConfigError(f"missing required option(s): {sorted('--' + m for m in missing)}")
    return cfg


def _add_options(sub: argparse.ArgumentParser, defaults: dict, flags: dict):
    sub.add_argument("--config", default=None, metavar="JSON",
                     help="JSON file overriding built-in defaults")
    for dest, value in defaults.items():
        kwargs = dict(flags.get(dest, {}))
        kwargs.setdefault("help", f"default: {value}" if value is not None else "required")
        flag = "--" + dest.replace("_", "-")
        sub.add_argument(flag, dest=dest, default=argparse.SUPPRESS, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvscale",
        description="Scene-scale variability metrics and per-scene scale learning.",
    )
    sub = parser.add_subparsers(dest="command")

    synth = sub.add_parser("synth", help="synthetic data commands")
    synth_sub = synth.add_subparsers(dest="synth_command")
    gen = synth_sub.add_parser("gen", help="generate a synthetic dataset")
    _add_options(gen, SYNTH_GEN_DEFAULTS, {
        "scenes": {"type": int}, "image_size": {"type": int},
        "seed": {"type": int}, "traj_steps": {"type": int},
        "min_patches": {"type": int}, "max_patches": {"type": int},
        "log_scale_low": {"type": float}, "log_scale_high": {"type": float},
        "threads": {"type": int},
    })
    gen.set_defaults(func=cmd_synth_gen, defaults=SYNTH_GEN_DEFAULTS)

    sfc_p = sub.add_parser("sfc", help="sample flow consistency protocol")
    _add_options(sfc_p, SFC_DEFAULTS, {
        "seed": {"type": int}, "threads": {"type": int}, "sigma": {"type": float},
        "samples_per_view": {"type": int}, "images_per_eval": {"type": int},
        "threshold_t": {"type": float}, "consensus_epsilon": {"type": float},
        "mask": {"choices": ["ground-truth", "consensus"]},
        "heatmaps": {"type": lambda s: s.lower() not in ("0", "false", "no")},
    })
    sfc_p.set_defaults(func=cmd_sfc, defaults=SFC_DEFAULTS)

    tsed_p = sub.add_parser("ss-tsed", help="scale-sensitive TSED protocol")
    _add_options(tsed_p, SS_TSED_DEFAULTS, {
        "seed": {"type": int}, "threads": {"type": int}, "sigma": {"type": float},
        "pairs_per_image": {"type": int}, "images_per_eval": {"type": int},
        "matches_per_pair": {"type": int}, "t_matches": {"type": int},
        "translation_magnitude": {"type": float},
    })
    tsed_p.set_defaults(func=cmd_ss_tsed, defaults=SS_TSED_DEFAULTS)

    learn = sub.add_parser("scale-learn", help="per-scene scale optimization")
    _add_options(learn, SCALE_LEARN_DEFAULTS, {
        "seed": {"type": int}, "threads": {"type": int}, "epochs": {"type": int},
        "learning_rate": {"type": float}, "batch_size": {"type": int},
        "max_pixels": {"type": int}, "delta_stride": {"type": int},
    })
    learn.set_defaults(func=cmd_scale_learn, defaults=SCALE_LEARN_DEFAULTS)

    calib = sub.add_parser("calibrate", help="metric-depth scale calibration")
    _add_options(calib, CALIBRATE_DEFAULTS, {
        "seed": {"type": int}, "threads": {"type": int},
        "unreliable_fraction": {"type": float},
        "policy": {"choices": ["fallback-one", "trim"]},
        "log_space": {"type": lambda s: s.lower() in ("1", "true", "yes")},
    })
    calib.set_defaults(func=cmd_calibrate, defaults=CALIBRATE_DEFAULTS)

    heat = sub.add_parser("edge-heatmap", help="averaged edge-response maps")
    _add_options(heat, EDGE_HEATMAP_DEFAULTS, {
        "seed": {"type": int}, "threads": {"type": int}, "sigma": {"type": float},
        "samples_per_view": {"type": int}, "magnitude": {"type": float},
    })
    heat.set_defaults(func=cmd_edge_heatmap, defaults=EDGE_HEATMAP_DEFAULTS)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    func = getattr(ns, "func", None)
    if func is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = _resolve(ns.defaults, ns)
        func(cfg)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
