"""Batch experiments: scenes x models x attack settings.

A cell is one attack run.  Cells are seeded from the run seed plus a hash
of the cell's identity, so results do not depend on execution order and a
parallel run reproduces a serial one.  A cell that raises is recorded with
its error and the suite continues.

Aggregations operate on plain cell dicts (the JSON form), so reports can
be rebuilt from stored files without rerunning anything.
"""

from __future__ import annotations

import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, AttackResult, ObjectiveEvaluator, PgdParams, PsoParams, run_attack
from .constraints import PerturbationConstraints, PhysicalBounds
from .generate import HALF_LANE, hash_label
from .metrics import DIRECTIONS, METRIC_NAMES, transferability
from .predictors import Predictor
from .scene import Scene

AGGREGATIONS = ("matched", "best")


@dataclass(frozen=True)
class AttackGrid:
    """Cartesian grid of attack settings applied to every scene x model."""

    objectives: tuple[str, ...] = METRIC_NAMES
    l_p_values: tuple[int, ...] = (1,)
    max_deviations: tuple[float, ...] = (1.0,)
    optimizers: tuple[str, ...] = ("pgd",)
    future_source: str = "ground_truth"
    context_frames: int = 3
    pgd: PgdParams = field(default_factory=PgdParams)
    pso: PsoParams = field(default_factory=PsoParams)

    def configs(self, bounds: PhysicalBounds) -> list[AttackConfig]:
        out = []
        for dev in self.max_deviations:
            cons = PerturbationConstraints(
                bounds=bounds, max_deviation=dev, context_frames=self.context_frames
            )
            for objective in self.objectives:
                for l_p in self.l_p_values:
                    for opt in self.optimizers:
                        out.append(
                            AttackConfig(
                                constraints=cons,
                                objective=objective,
                                l_p=l_p,
                                optimizer=opt,
                                future_source=self.future_source,
                                pgd=self.pgd,
                                pso=self.pso,
                            )
                        )
        return out


@dataclass
class SuiteCell:
    scene_id: str
    model_id: str
    config: AttackConfig
    result: AttackResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def cell_to_dict(cell: SuiteCell) -> dict:
    """JSON-ready view of one cell; floats round-trip exactly."""
    cfg = cell.config
    out = {
        "scene_id": cell.scene_id,
        "model_id": cell.model_id,
        "config": {
            "objective": cfg.objective,
            "l_p": cfg.l_p,
            "max_deviation": cfg.constraints.max_deviation,
            "context_frames": cfg.constraints.context_frames,
            "optimizer": cfg.optimizer,
            "future_source": cfg.future_source,
            "seed": cfg.seed,
        },
    }
    if cell.error is not None:
        out["error"] = cell.error
        return out
    r = cell.result
    trace = r.objective_trace
    out.update(
        {
            "before": r.before.as_dict(),
            "after": r.after.as_dict(),
            "theta": r.theta,
            "trace": {
                "n_iter": len(trace),
                "first": trace[0] if trace else r.baseline_objective,
                "last": trace[-1] if trace else r.baseline_objective,
                "best": r.best_objective,
                "baseline": r.baseline_objective,
            },
            "feasible": bool(r.feasibility),
            "lane_deviation": r.lane_deviation(),
            "model_kind": r.model_kind,
        }
    )
    return out


@dataclass
class SuiteResult:
    cells: list[SuiteCell]

    @property
    def failed(self) -> list[SuiteCell]:
        return [c for c in self.cells if not c.ok]

    def to_dicts(self) -> list[dict]:
        return [cell_to_dict(c) for c in self.cells]

    def summary_rows(self, aggregation: str = "matched") -> list[dict]:
        return summary_rows(self.to_dicts(), aggregation)

    def sweep_rows(self, axis: str) -> list[dict]:
        return sweep_rows(self.to_dicts(), axis)

    def optimizer_rows(self) -> list[dict]:
        return optimizer_rows(self.to_dicts())

    def deviation_fraction(self, threshold: float = HALF_LANE) -> dict[str, float]:
        return deviation_fraction(self.to_dicts(), threshold)


def _ok(cells: list[dict]) -> list[dict]:
    return [c for c in cells if "error" not in c]


def summary_rows(cells: list[dict], aggregation: str = "matched") -> list[dict]:
    """Per-model normal/attack means for each metric.

    matched: average the attack cells whose objective targeted that
    metric.  best: within each group of cells differing only in objective,
    take the worst induced value per metric, then average the groups.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
    cells = _ok(cells)
    rows = []
    for model_id in sorted({c["model_id"] for c in cells}):
        mine = [c for c in cells if c["model_id"] == model_id]
        row: dict = {"model_id": model_id, "aggregation": aggregation}
        for metric in METRIC_NAMES:
            if aggregation == "matched":
                group = [c for c in mine if c["config"]["objective"] == metric]
                normals = [c["before"][metric] for c in group]
                attacks = [c["after"][metric] for c in group]
            else:
                buckets: dict[tuple, list[dict]] = {}
                for c in mine:
                    cfg = c["config"]
                    key = (c["scene_id"], cfg["l_p"], cfg["max_deviation"], cfg["optimizer"])
                    buckets.setdefault(key, []).append(c)
                normals = [b[0]["before"][metric] for b in buckets.values()]
                attacks = [max(c["after"][metric] for c in b) for b in buckets.values()]
            row[f"normal_{metric}"] = float(np.mean(normals)) if normals else float("nan")
            row[f"attack_{metric}"] = float(np.mean(attacks)) if attacks else float("nan")
        rows.append(row)
    return rows


def deviation_fraction(cells: list[dict], threshold: float = HALF_LANE) -> dict[str, float]:
    """Per model: fraction of attacked cases whose worst directional
    deviation crosses into the adjacent lane."""
    cells = [c for c in _ok(cells) if c["config"]["objective"] in DIRECTIONS]
    out: dict[str, float] = {}
    for model_id in sorted({c["model_id"] for c in cells}):
        by_case: dict[tuple, float] = {}
        for c in cells:
            if c["model_id"] != model_id:
                continue
            cfg = c["config"]
            key = (c["scene_id"], cfg["l_p"], cfg["max_deviation"], cfg["optimizer"])
            value = c["after"][cfg["objective"]]
            by_case[key] = max(by_case.get(key, -np.inf), value)
        if by_case:
            hits = sum(1 for v in by_case.values() if v > threshold)
            out[model_id] = hits / len(by_case)
    return out


def sweep_rows(cells: list[dict], axis: str) -> list[dict]:
    """Mean targeted normal/attack error per (model, objective, axis
    value), where axis is "l_p" or "max_deviation"."""
    if axis not in ("l_p", "max_deviation"):
        raise ValueError("axis must be 'l_p' or 'max_deviation'")
    groups: dict[tuple, list[dict]] = {}
    for c in _ok(cells):
        cfg = c["config"]
        groups.setdefault((c["model_id"], cfg["objective"], cfg[axis]), []).append(c)
    rows = []
    for (model_id, objective, value), group in sorted(groups.items()):
        rows.append(
            {
                "model_id": model_id,
                "objective": objective,
                axis: value,
                "normal": float(np.mean([c["before"][objective] for c in group])),
                "attack": float(np.mean([c["after"][objective] for c in group])),
            }
        )
    return rows


def optimizer_rows(cells: list[dict]) -> list[dict]:
    """Mean targeted normal/attack error per (model, objective, optimizer);
    paired rows compare white-box and black-box search."""
    groups: dict[tuple, list[dict]] = {}
    for c in _ok(cells):
        cfg = c["config"]
        groups.setdefault((c["model_id"], cfg["objective"], cfg["optimizer"]), []).append(c)
    rows = []
    for (model_id, objective, opt), group in sorted(groups.items()):
        rows.append(
            {
                "model_id": model_id,
                "objective": objective,
                "optimizer": opt,
                "normal": float(np.mean([c["before"][objective] for c in group])),
                "attack": float(np.mean([c["after"][objective] for c in group])),
            }
        )
    return rows


def cell_seed(base_seed: int, scene_id: str, model_id: str, cfg: AttackConfig) -> int:
    """Stable per-cell seed, independent of grid enumeration order."""
    identity = "|".join(
        [
            scene_id,
            model_id,
            cfg.objective,
            str(cfg.l_p),
            repr(cfg.constraints.max_deviation),
            cfg.optimizer,
            cfg.future_source,
        ]
    )
    return (base_seed * 1_000_003 + hash_label(identity)) % (2**63)


def _execute_cell(args: tuple[Scene, Predictor, str, AttackConfig]) -> SuiteCell:
    scene, model, model_id, cfg = args
    cell = SuiteCell(scene_id=scene.scene_id, model_id=model_id, config=cfg)
    try:
        cell.result = run_attack(scene, model, cfg)
    except Exception:
        cell.error = traceback.format_exc(limit=8)
    return cell


def run_attack_suite(
    scenes: list[Scene],
    models: dict[str, Predictor],
    grid: AttackGrid,
    bounds: PhysicalBounds,
    seed: int = 0,
    jobs: int = 1,
) -> SuiteResult:
    tasks = []
    for scene in scenes:
        for model_id, model in sorted(models.items()):
            for cfg in grid.configs(bounds):
                seeded = cfg.with_seed(cell_seed(seed, scene.scene_id, model_id, cfg))
                tasks.append((scene, model, model_id, seeded))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_execute_cell, tasks, chunksize=4))
    else:
        cells = [_execute_cell(t) for t in tasks]
    return SuiteResult(cells=cells)


@dataclass
class TransferTable:
    """percent[src][tgt] = mean transferability of src's perturbations
    evaluated on tgt, over the attacked scenes."""

    model_ids: list[str]
    percent: dict[str, dict[str, float]]
    skipped: dict[str, dict[str, int]]

    def row(self, src: str) -> dict[str, float]:
        return self.percent[src]


def transfer_matrix(
    scenes: list[Scene],
    models: dict[str, Predictor],
    cfg: AttackConfig,
    seed: int = 0,
) -> TransferTable:
    """Attack each scene under each source model, replay the perturbation
    on every target model, and average the six-metric transfer ratios.

    The source's own report is reused as the self-transfer target, so the
    diagonal is exactly 100 percent.  Scenes without enough frames for the
    config are skipped; if none qualifies the matrix is undefined.
    """
    ids = sorted(models)
    sums = {s: {t: 0.0 for t in ids} for s in ids}
    counts = {s: {t: 0 for t in ids} for s in ids}
    skipped = {s: {t: 0 for t in ids} for s in ids}
    for scene in scenes:
        if scene.n_frames < scene.l_i + scene.l_o + cfg.l_p - 1:
            continue
        evaluators = {t: ObjectiveEvaluator(scene, models[t], cfg) for t in ids}
        for src in ids:
            seeded = cfg.with_seed(cell_seed(seed, scene.scene_id, src, cfg))
            result = run_attack(scene, models[src], seeded)
            for tgt in ids:
                if tgt == src:
                    target_report = result.after
                else:
                    target_report, _ = evaluators[tgt].report(result.perturbation)
                score = transferability(result.after, target_report)
                sums[src][tgt] += score.percent
                counts[src][tgt] += 1
                skipped[src][tgt] += len(score.skipped)
    if not any(counts[s][t] for s in ids for t in ids):
        raise ValueError(f"no scene has enough frames for l_p={cfg.l_p}")
    percent = {s: {t: sums[s][t] / counts[s][t] for t in ids} for s in ids}
    return TransferTable(model_ids=ids, percent=percent, skipped=skipped)
