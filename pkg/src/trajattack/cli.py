"""Batch front end: generate scenes, train models, run attack grids,
evaluate mitigations, and rebuild reports from stored cells.

One JSON config describes a whole experiment; command-line flags override
individual fields.  Every command writes a manifest (resolved config, its
hash, seed, library versions) next to its outputs, and all artifacts are
deterministic functions of the manifest: rerunning a command with an
identical manifest reproduces identical bytes.

Exit codes: 0 success, 1 config or input error, 2 completed with some
errored attack cells (listed in errors.txt).
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import OPTIMIZERS
from .constraints import (
    PerturbationConstraints,
    estimate_bounds,
    load_bounds,
    preset_bounds,
    save_bounds,
)
from .generate import FAMILIES, PRESETS, generate_corpus, hash_label
from .metrics import METRIC_NAMES
from .mitigation import (
    DETECTOR_KINDS,
    PIPELINE_MODES,
    DefendedPredictor,
    DefensePipeline,
    augment,
    make_augmenter,
    save_detector,
    save_roc,
    train_detector,
)
from .planning import SEVERITIES, av_behind_target, impact_report
from .predictors import MODEL_KINDS, TrainOptions, load_model, make_predictor, save_model, train
from .scene import Scene, SceneFormatError, Trajectory, load_scene, save_scene
from .smoothing import DEFAULT_KERNEL, SmootherSpec
from .suite import (
    AttackGrid,
    cell_to_dict,
    deviation_fraction,
    optimizer_rows,
    run_attack_suite,
    summary_rows,
    sweep_rows,
    transfer_matrix,
)
from .attacks import PgdParams, PsoParams


class ConfigError(ValueError):
    """Bad configuration or missing prerequisite artifact."""


DEFAULT_CONFIG: dict = {
    "seed": 0,
    "out": "trajattack_run",
    "dataset": {
        "preset": "apolloscape_like",
        "count": 100,
        "families": list(FAMILIES),
        "extra_frames": 5,
        "scenes_dir": None,
    },
    "models": [
        {"id": "constant_velocity", "kind": "constant_velocity"},
        {"id": "constant_acceleration", "kind": "constant_acceleration"},
        {"id": "neural", "kind": "neural"},
    ],
    "train": {"epochs": 40, "learning_rate": 0.003, "batch_size": 64},
    "attack": {
        "objectives": list(METRIC_NAMES),
        "l_p_values": [1],
        "max_deviations": [1.0],
        "optimizers": ["pgd"],
        "future_source": "ground_truth",
        "context_frames": 3,
        "bounds": "preset",
        "pgd": {"learning_rate": 0.01, "max_iter": 100},
        "pso": {
            "particles": 10,
            "inertia": 1.0,
            "cognitive": 0.5,
            "social": 0.3,
            "max_iter": 100,
        },
        "transfer": False,
    },
    "mitigation": {
        "models": ["neural"],
        "detectors": ["rule_based", "kernel_classifier"],
        "pipeline_detector": "rule_based",
        "pipeline_mode": "detect_then_smooth",
        "smoother_kernel": list(DEFAULT_KERNEL),
        "augment_probability": 0.5,
        "augment_deviation": 1.0,
    },
    "planning": {
        "enabled": False,
        "gap": 20.0,
        "velocity": 15.0,
        "lane_width": 3.7,
        "safety_margin": 2.0,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _validate(cfg: dict) -> None:
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    ds = cfg["dataset"]
    if ds["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {ds['preset']!r}, have {tuple(PRESETS)}")
    if ds["count"] < 1:
        raise ConfigError("dataset.count must be >= 1")
    bad = [f for f in ds["families"] if f not in FAMILIES]
    if bad:
        raise ConfigError(f"unknown scene families {bad}")
    if ds["scenes_dir"] is not None and not Path(ds["scenes_dir"]).is_dir():
        raise ConfigError(f"dataset.scenes_dir does not exist: {ds['scenes_dir']}")
    if not cfg["models"]:
        raise ConfigError("at least one model is required")
    ids = [m.get("id") for m in cfg["models"]]
    if len(set(ids)) != len(ids):
        raise ConfigError("model ids must be unique")
    for m in cfg["models"]:
        if m.get("kind") not in MODEL_KINDS:
            raise ConfigError(f"model {m.get('id')!r}: kind must be one of {MODEL_KINDS}")
    atk = cfg["attack"]
    for key, allowed in (("objectives", METRIC_NAMES), ("optimizers", OPTIMIZERS)):
        values = atk[key]
        if not values:
            raise ConfigError(f"attack.{key} must be nonempty")
        bad = [v for v in values if v not in allowed]
        if bad:
            raise ConfigError(f"attack.{key}: unknown values {bad}")
    if not atk["l_p_values"] or any(int(v) < 1 for v in atk["l_p_values"]):
        raise ConfigError("attack.l_p_values must be nonempty positive integers")
    if not atk["max_deviations"] or any(float(v) <= 0 for v in atk["max_deviations"]):
        raise ConfigError("attack.max_deviations must be nonempty and positive")
    if atk["future_source"] not in ("ground_truth", "self_predicted"):
        raise ConfigError("attack.future_source must be ground_truth or self_predicted")
    mit = cfg["mitigation"]
    bad = [d for d in mit["detectors"] if d not in DETECTOR_KINDS]
    if bad:
        raise ConfigError(f"mitigation.detectors: unknown kinds {bad}")
    if mit["pipeline_detector"] not in mit["detectors"]:
        raise ConfigError("mitigation.pipeline_detector must be among mitigation.detectors")
    if mit["pipeline_mode"] not in PIPELINE_MODES:
        raise ConfigError(f"mitigation.pipeline_mode must be one of {PIPELINE_MODES}")
    try:
        SmootherSpec(tuple(mit["smoother_kernel"]))
    except ValueError as exc:
        raise ConfigError(f"mitigation.smoother_kernel: {exc}") from None


def load_config(path: str | None, overrides: argparse.Namespace | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"no such config file: {p}")
        try:
            user = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: top level must be an object")
        cfg = _merge(cfg, user)
    if overrides is not None:
        if getattr(overrides, "seed", None) is not None:
            cfg["seed"] = overrides.seed
        if getattr(overrides, "out", None) is not None:
            cfg["out"] = overrides.out
        if getattr(overrides, "preset", None) is not None:
            cfg["dataset"]["preset"] = overrides.preset
        if getattr(overrides, "max_deviation", None) is not None:
            cfg["attack"]["max_deviations"] = [overrides.max_deviation]
        if getattr(overrides, "lp", None) is not None:
            cfg["attack"]["l_p_values"] = [overrides.lp]
        if getattr(overrides, "objective", None) is not None:
            cfg["attack"]["objectives"] = [overrides.objective]
        if getattr(overrides, "optimizer", None) is not None:
            cfg["attack"]["optimizers"] = [overrides.optimizer]
    _validate(cfg)
    return cfg


# -- small output helpers -----------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(row.get(h)) for h in header) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _write_manifest(out: Path, command: str, cfg: dict) -> None:
    canon = json.dumps(cfg, sort_keys=True)
    manifest = {
        "command": command,
        "config": cfg,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": cfg["seed"],
        "versions": {"trajattack": __version__, "numpy": np.__version__},
    }
    _write_json(out / f"{command}_manifest.json", manifest)


def _derived_seed(base: int, label: str) -> int:
    return (base * 1_000_003 + hash_label(label)) % (2**63)


def svg_line_chart(path: Path, title: str, x_label: str, series: dict[str, list[tuple[float, float]]]) -> None:
    """Minimal standalone SVG line chart; no plotting dependency."""
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 34, 46
    pts = [p for s in series.values() for p in s]
    if not pts:
        return
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * (width - left - right)

    def sy(y: float) -> float:
        return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{x_label}</text>',
    ]
    for i in range(5):
        tx = x0 + i * (x1 - x0) / 4
        ty = y0 + i * (y1 - y0) / 4
        parts.append(
            f'<text x="{sx(tx):.1f}" y="{height - bottom + 16}" text-anchor="middle" font-size="10">{tx:.3g}</text>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{sy(ty) + 3:.1f}" text-anchor="end" font-size="10">{ty:.3g}</text>'
        )
        parts.append(
            f'<line x1="{left}" y1="{sy(ty):.1f}" x2="{width - right}" y2="{sy(ty):.1f}" stroke="#dddddd"/>'
        )
    for i, name in enumerate(sorted(series)):
        color = palette[i % len(palette)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(series[name]))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - right - 4}" y="{top + 14 * (i + 1)}" text-anchor="end" '
            f'font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


# -- shared loading -----------------------------------------------------------


def _scenes_dir(cfg: dict) -> Path:
    if cfg["dataset"]["scenes_dir"] is not None:
        return Path(cfg["dataset"]["scenes_dir"])
    return Path(cfg["out"]) / "scenes"


def _load_scenes(cfg: dict) -> list[Scene]:
    directory = _scenes_dir(cfg)
    files = sorted(directory.glob("*.json"))
    if not files:
        raise ConfigError(f"no scene files in {directory}; run the generate command first")
    return [load_scene(f) for f in files]


def _attack_bounds(cfg: dict):
    source = cfg["attack"]["bounds"]
    if source == "preset":
        return preset_bounds(cfg["dataset"]["preset"])
    if source == "estimated":
        path = Path(cfg["out"]) / "bounds.json"
        if not path.exists():
            raise ConfigError(f"no estimated bounds at {path}; run the generate command first")
        return load_bounds(path)
    if not Path(source).exists():
        raise ConfigError(f"attack.bounds file does not exist: {source}")
    return load_bounds(source)


def _grid(cfg: dict) -> AttackGrid:
    atk = cfg["attack"]
    return AttackGrid(
        objectives=tuple(atk["objectives"]),
        l_p_values=tuple(int(v) for v in atk["l_p_values"]),
        max_deviations=tuple(float(v) for v in atk["max_deviations"]),
        optimizers=tuple(atk["optimizers"]),
        future_source=atk["future_source"],
        context_frames=int(atk["context_frames"]),
        pgd=PgdParams(
            learning_rate=float(atk["pgd"]["learning_rate"]),
            max_iter=int(atk["pgd"]["max_iter"]),
        ),
        pso=PsoParams(
            particles=int(atk["pso"]["particles"]),
            inertia=float(atk["pso"]["inertia"]),
            cognitive=float(atk["pso"]["cognitive"]),
            social=float(atk["pso"]["social"]),
            max_iter=int(atk["pso"]["max_iter"]),
        ),
    )


def _load_models(cfg: dict) -> dict:
    models_dir = Path(cfg["out"]) / "models"
    out = {}
    for spec in cfg["models"]:
        path = models_dir / f"{spec['id']}.json"
        if not path.exists():
            raise ConfigError(f"missing checkpoint {path}; run the train command first")
        out[spec["id"]] = load_model(path)
    return out


CELL_CSV_HEADER = (
    ["scene_id", "model_id", "objective", "l_p", "max_deviation", "optimizer", "seed"]
    + ["feasible", "theta_last", "baseline_objective", "best_objective", "lane_deviation"]
    + [f"normal_{m}" for m in METRIC_NAMES]
    + [f"attack_{m}" for m in METRIC_NAMES]
)

SUMMARY_CSV_HEADER = (
    ["model_id", "aggregation"]
    + [x for m in METRIC_NAMES for x in (f"normal_{m}", f"attack_{m}")]
    + ["crossed_half_lane"]
)


def _cell_csv_row(d: dict) -> dict:
    cfg = d["config"]
    row = {
        "scene_id": d["scene_id"],
        "model_id": d["model_id"],
        "objective": cfg["objective"],
        "l_p": cfg["l_p"],
        "max_deviation": cfg["max_deviation"],
        "optimizer": cfg["optimizer"],
        "seed": cfg["seed"],
        "feasible": d["feasible"],
        "theta_last": d["theta"]["last"],
        "baseline_objective": d["trace"]["baseline"],
        "best_objective": d["trace"]["best"],
        "lane_deviation": d["lane_deviation"],
    }
    for m in METRIC_NAMES:
        row[f"normal_{m}"] = d["before"][m]
        row[f"attack_{m}"] = d["after"][m]
    return row


def _summary_with_crossing(dicts: list[dict]) -> list[dict]:
    crossing = deviation_fraction(dicts)
    rows = summary_rows(dicts, "matched") + summary_rows(dicts, "best")
    for row in rows:
        row["crossed_half_lane"] = crossing.get(row["model_id"])
    return rows


def _write_reports(dicts: list[dict], directory: Path) -> None:
    ok = [d for d in dicts if "error" not in d]
    write_csv(directory / "cells.csv", CELL_CSV_HEADER, [_cell_csv_row(d) for d in ok])
    write_csv(directory / "summary.csv", SUMMARY_CSV_HEADER, _summary_with_crossing(ok))
    write_csv(
        directory / "sweep_lp.csv",
        ["model_id", "objective", "l_p", "normal", "attack"],
        sweep_rows(ok, "l_p"),
    )
    write_csv(
        directory / "sweep_deviation.csv",
        ["model_id", "objective", "max_deviation", "normal", "attack"],
        sweep_rows(ok, "max_deviation"),
    )
    write_csv(
        directory / "optimizers.csv",
        ["model_id", "objective", "optimizer", "normal", "attack"],
        optimizer_rows(ok),
    )
    if any("impact" in d for d in ok):
        write_csv(
            directory / "severity.csv",
            ["model_id", "severity", "before", "after"],
            _severity_rows(ok),
        )


def _severity_rows(dicts: list[dict]) -> list[dict]:
    counts: dict[tuple[str, str], dict[str, int]] = {}
    for d in dicts:
        if "impact" not in d:
            continue
        for side in ("before", "after"):
            sev = d["impact"][side]["severity"]
            entry = counts.setdefault((d["model_id"], sev), {"before": 0, "after": 0})
            entry[side] += 1
    rows = []
    for model_id in sorted({k[0] for k in counts}):
        for sev in SEVERITIES:
            entry = counts.get((model_id, sev))
            if entry:
                rows.append(
                    {"model_id": model_id, "severity": sev, "before": entry["before"], "after": entry["after"]}
                )
    return rows


def _write_errors(dicts: list[dict], path: Path) -> int:
    failed = [d for d in dicts if "error" in d]
    lines = []
    for d in failed:
        cfg = d["config"]
        ident = (
            f"{d['scene_id']} {d['model_id']} {cfg['objective']} "
            f"lp={cfg['l_p']} dev={cfg['max_deviation']} {cfg['optimizer']}"
        )
        lines.append(ident)
        lines.append(d["error"].rstrip())
        lines.append("-" * 60)
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return len(failed)


# -- commands -------------------------------------------------------------------


def cmd_generate(cfg: dict, jobs: int) -> int:
    out = Path(cfg["out"])
    scenes_dir = out / "scenes"
    scenes_dir.mkdir(parents=True, exist_ok=True)
    ds = cfg["dataset"]
    scenes = generate_corpus(
        ds["preset"],
        cfg["seed"],
        count=int(ds["count"]),
        families=tuple(ds["families"]),
        extra_frames=int(ds["extra_frames"]),
    )
    for scene in scenes:
        save_scene(scene, scenes_dir / f"{scene.scene_id}.json")
    save_bounds(estimate_bounds(scenes), out / "bounds.json")
    _write_manifest(out, "generate", cfg)
    print(f"wrote {len(scenes)} scenes and estimated bounds under {out}")
    return 0


def cmd_train(cfg: dict, jobs: int) -> int:
    scenes = _load_scenes(cfg)
    out = Path(cfg["out"])
    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    l_i, l_o = scenes[0].l_i, scenes[0].l_o
    tr = cfg["train"]
    for spec in cfg["models"]:
        model_id, kind = spec["id"], spec["kind"]
        smoother = SmootherSpec(tuple(spec["smoother"])) if spec.get("smoother") else None
        seed = _derived_seed(cfg["seed"], model_id)
        model = make_predictor(kind, l_i, l_o, smoother, seed=seed)
        if kind == "neural":
            opts = TrainOptions(
                epochs=int(tr["epochs"]),
                learning_rate=float(tr["learning_rate"]),
                batch_size=int(tr["batch_size"]),
                seed=seed,
            )
            model, losses = train(model, scenes, opts)
            write_csv(
                models_dir / f"{model_id}_loss.csv",
                ["epoch", "loss"],
                [{"epoch": i, "loss": v} for i, v in enumerate(losses)],
            )
            print(f"trained {model_id}: loss {losses[0]:.4f} -> {losses[-1]:.4f}")
        else:
            print(f"prepared {model_id} ({kind})")
        save_model(model, models_dir / f"{model_id}.json")
    _write_manifest(out, "train", cfg)
    return 0


def _attach_impact(cfg: dict, suite, dicts: list[dict], scenes: list[Scene]) -> None:
    plan = cfg["planning"]
    if not plan["enabled"]:
        return
    by_id = {s.scene_id: s for s in scenes}
    for cell, d in zip(suite.cells, dicts):
        if not cell.ok:
            continue
        scene = by_id[cell.scene_id]
        av = av_behind_target(
            scene,
            gap=float(plan["gap"]),
            velocity=float(plan["velocity"]),
            lane_width=float(plan["lane_width"]),
            safety_margin=float(plan["safety_margin"]),
        )
        d["impact"] = impact_report(cell.result, scene, av).as_dict()


def cmd_attack(cfg: dict, jobs: int) -> int:
    scenes = _load_scenes(cfg)
    models = _load_models(cfg)
    bounds = _attack_bounds(cfg)
    grid = _grid(cfg)
    suite = run_attack_suite(scenes, models, grid, bounds, seed=cfg["seed"], jobs=jobs)
    out = Path(cfg["out"])
    attack_dir = out / "attack"
    cells_dir = attack_dir / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)

    dicts = suite.to_dicts()
    _attach_impact(cfg, suite, dicts, scenes)
    for i, d in enumerate(dicts):
        name = f"{i:05d}_{d['model_id']}_{d['config']['objective']}.json"
        _write_json(cells_dir / name, d)
    _write_reports(dicts, attack_dir)
    n_failed = _write_errors(dicts, attack_dir / "errors.txt")

    if cfg["attack"]["transfer"] and len(models) > 1:
        tcfg = grid.configs(bounds)[0]
        try:
            table = transfer_matrix(scenes, models, tcfg, seed=cfg["seed"])
        except ValueError as exc:
            print(f"transfer skipped: {exc}", file=sys.stderr)
        else:
            rows = [
                {
                    "source": src,
                    "target": tgt,
                    "percent": table.percent[src][tgt],
                    "skipped": table.skipped[src][tgt],
                }
                for src in table.model_ids
                for tgt in table.model_ids
            ]
            write_csv(attack_dir / "transfer.csv", ["source", "target", "percent", "skipped"], rows)

    _write_manifest(out, "attack", cfg)
    print(f"attack: {len(dicts)} cells, {n_failed} errored; reports under {attack_dir}")
    return 2 if n_failed else 0


def _detector_training_sets(scenes: list[Scene], cons: PerturbationConstraints, seed: int):
    # Histories only: at test time the detector sees l_i frames.
    f = scenes[0].frequency_hz
    normal = [
        Trajectory("n", "vehicle", s.target.positions[: s.l_i]) for s in scenes
    ]
    rng = np.random.default_rng([seed, hash_label("detector")])
    adversarial = [
        augment(t, cons, probability=1.0, rng=rng, frequency_hz=f) for t in normal
    ]
    return normal, adversarial


def cmd_mitigate(cfg: dict, jobs: int) -> int:
    scenes = _load_scenes(cfg)
    baselines = _load_models(cfg)
    bounds = _attack_bounds(cfg)
    grid = _grid(cfg)
    out = Path(cfg["out"])
    mit_dir = out / "mitigate"
    models_dir = mit_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    mit = cfg["mitigation"]
    tr = cfg["train"]
    f = scenes[0].frequency_hz
    l_i, l_o = scenes[0].l_i, scenes[0].l_o
    kernel = SmootherSpec(tuple(mit["smoother_kernel"]))
    cons = PerturbationConstraints(bounds=bounds, max_deviation=float(mit["augment_deviation"]))

    normal_set, adversarial_set = _detector_training_sets(scenes, cons, cfg["seed"])
    detectors = {}
    for kind in mit["detectors"]:
        detector, roc = train_detector(normal_set, adversarial_set, kind, f, seed=cfg["seed"])
        detectors[kind] = detector
        save_detector(detector, mit_dir / f"detector_{kind}.json")
        save_roc(roc, mit_dir / f"roc_{kind}.csv")
        print(f"detector {kind}: AUC {roc.auc:.3f}")

    variants: dict = {}
    for model_id in mit["models"]:
        if model_id not in baselines:
            raise ConfigError(f"mitigation.models entry {model_id!r} has no checkpoint")
        base = baselines[model_id]
        variants[model_id] = base
        seed = _derived_seed(cfg["seed"], model_id)
        opts = dict(
            epochs=int(tr["epochs"]),
            learning_rate=float(tr["learning_rate"]),
            batch_size=int(tr["batch_size"]),
            seed=seed,
        )
        if base.kind == "neural":
            augmented = make_predictor("neural", l_i, l_o, seed=seed)
            hook = make_augmenter(cons, f, l_i, probability=float(mit["augment_probability"]))
            augmented, _ = train(augmented, scenes, TrainOptions(augmentation=hook, **opts))
            variants[f"{model_id}_augmented"] = augmented
            save_model(augmented, models_dir / f"{model_id}_augmented.json")

            smoothed = make_predictor("neural", l_i, l_o, seed=seed)
            smoothed, _ = train(smoothed, scenes, TrainOptions(smoothing=kernel, **opts))
            variants[f"{model_id}_smoothed"] = smoothed
            save_model(smoothed, models_dir / f"{model_id}_smoothed.json")
        else:
            smoothed = make_predictor(base.kind, l_i, l_o, smoother=kernel)
            variants[f"{model_id}_smoothed"] = smoothed
            save_model(smoothed, models_dir / f"{model_id}_smoothed.json")
        pipeline = DefensePipeline(
            smoother=kernel,
            mode=mit["pipeline_mode"],
            detector=detectors[mit["pipeline_detector"]],
            frequency_hz=f,
        )
        variants[f"{model_id}_defended"] = DefendedPredictor(base, pipeline)

    suite = run_attack_suite(scenes, variants, grid, bounds, seed=cfg["seed"], jobs=jobs)
    dicts = suite.to_dicts()
    write_csv(mit_dir / "comparison.csv", SUMMARY_CSV_HEADER, _summary_with_crossing(dicts))
    n_failed = _write_errors(dicts, mit_dir / "errors.txt")
    _write_manifest(out, "mitigate", cfg)
    print(f"mitigate: {len(variants)} variants, {n_failed} errored cells; reports under {mit_dir}")
    return 2 if n_failed else 0


def cmd_report(cfg: dict, jobs: int) -> int:
    out = Path(cfg["out"])
    cells_dir = out / "attack" / "cells"
    files = sorted(cells_dir.glob("*.json"))
    if not files:
        raise ConfigError(f"no stored cells in {cells_dir}; run the attack command first")
    dicts = [json.loads(f.read_text()) for f in files]
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    _write_reports(dicts, report_dir)
    _write_errors(dicts, report_dir / "errors.txt")

    ok = [d for d in dicts if "error" not in d]
    for axis, name in (("l_p", "sweep_lp"), ("max_deviation", "sweep_deviation")):
        rows = sweep_rows(ok, axis)
        series: dict[str, list[tuple[float, float]]] = {}
        for row in rows:
            key = f"{row['model_id']}/{row['objective']}"
            series.setdefault(key, []).append((float(row[axis]), row["attack"]))
        if any(len(v) > 1 for v in series.values()):
            svg_line_chart(
                report_dir / f"{name}.svg",
                f"attack error vs {axis}",
                axis,
                series,
            )
    _write_manifest(out, "report", cfg)
    print(f"rebuilt reports for {len(ok)} cells under {report_dir}")
    return 0


# -- entry point ----------------------------------------------------------------


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "attack": cmd_attack,
    "mitigate": cmd_mitigate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajattack",
        description="Feasible adversarial perturbations against trajectory predictors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "generate a synthetic scene corpus and estimated bounds"),
        ("train", "fit or materialize model checkpoints"),
        ("attack", "run the attack grid and write reports"),
        ("mitigate", "train mitigations, re-attack them, and write comparisons"),
        ("report", "rebuild aggregate reports from stored cells"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="experiment config JSON")
        cmd.add_argument("--seed", type=int, help="override config seed")
        cmd.add_argument("--out", help="override output directory")
        cmd.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
        cmd.add_argument("--preset", choices=sorted(PRESETS), help="override dataset preset")
        cmd.add_argument("--max-deviation", type=float, help="single deviation bound (m)")
        cmd.add_argument("--lp", type=int, help="single multi-frame horizon")
        cmd.add_argument("--objective", choices=METRIC_NAMES, help="single attack objective")
        cmd.add_argument("--optimizer", choices=OPTIMIZERS, help="single optimizer")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = args.jobs if args.jobs else max(1, os.cpu_count() or 1)
    if jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg, jobs)
    except (ConfigError, SceneFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
