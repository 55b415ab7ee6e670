"""Adversarial perturbation search against a single scene and model.

The attacker controls the target vehicle's history: a perturbation delta
covers the first l_i + l_p - 1 frames and is scored by the mean prediction
error it induces over the l_p evaluation frames l_i .. l_i + l_p - 1, each
of which predicts from the preceding l_i perturbed frames.  The search
minimizes loss(delta) = -(1/l_p) * sum_alpha metric(P_alpha, F_alpha), so
lower loss means larger induced error.  Candidates are repaired by the
uniform-shrink projection before every evaluation, and both optimizers
carry a deterministic all-zero candidate, so the reported attack error is
never below the unattacked error on the targeted metric.

Reference futures F are the ground truth, or the model's own pre-attack
predictions when the attacker is denied future knowledge
(future_source="self_predicted").  Reports always measure against ground
truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import Feasibility, PerturbationConstraints, check_feasible, project_positions
from .metrics import DIRECTIONS, METRIC_NAMES, ErrorReport, error_report, mean_report
from .predictors import Predictor
from .scene import Scene, left_normal, unit_directions

OPTIMIZERS = ("pgd", "pso")
FUTURE_SOURCES = ("ground_truth", "self_predicted")

# Random PGD starts are drawn uniformly from this box (meters); small
# relative to the deviation cap so the zero neighborhood is explored.
INIT_BOX = 0.1


@dataclass(frozen=True)
class PgdParams:
    learning_rate: float = 0.01
    max_iter: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class PsoParams:
    particles: int = 10
    inertia: float = 1.0
    cognitive: float = 0.5
    social: float = 0.3
    max_iter: int = 100


@dataclass(frozen=True)
class AttackConfig:
    constraints: PerturbationConstraints
    objective: str = "ade"
    l_p: int = 1
    optimizer: str = "pgd"
    future_source: str = "ground_truth"
    seed: int = 0
    pgd: PgdParams = field(default_factory=PgdParams)
    pso: PsoParams = field(default_factory=PsoParams)

    def __post_init__(self):
        if self.objective not in METRIC_NAMES:
            raise ValueError(f"objective must be one of {METRIC_NAMES}")
        if self.l_p < 1:
            raise ValueError("l_p must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.future_source not in FUTURE_SOURCES:
            raise ValueError(f"future_source must be one of {FUTURE_SOURCES}")
        if self.pgd.learning_rate <= 0 or self.pgd.max_iter < 0:
            raise ValueError("pgd needs learning_rate > 0 and max_iter >= 0")
        if self.pso.particles < 1 or self.pso.max_iter < 0:
            raise ValueError("pso needs particles >= 1 and max_iter >= 0")

    def with_seed(self, seed: int) -> "AttackConfig":
        return replace(self, seed=seed)


@dataclass
class AttackResult:
    """Best perturbation found plus everything reports need."""

    perturbation: np.ndarray
    theta: dict[str, float]
    objective_trace: list[float]
    baseline_objective: float
    best_objective: float
    before: ErrorReport
    after: ErrorReport
    feasibility: Feasibility
    pred_before: np.ndarray
    pred_after: np.ndarray
    config: AttackConfig
    scene_id: str
    model_kind: str

    @property
    def targeted_before(self) -> float:
        return self.before.value(self.config.objective)

    @property
    def targeted_after(self) -> float:
        return self.after.value(self.config.objective)

    def lane_deviation(self) -> float:
        """Largest directional deviation achieved, for the half-lane flag."""
        return max(self.after.value(d) for d in DIRECTIONS)


class ObjectiveEvaluator:
    """Caches everything about (scene, model, config) that does not depend
    on the perturbation, then scores deltas quickly."""

    def __init__(self, scene: Scene, model: Predictor, cfg: AttackConfig):
        if model.l_i != scene.l_i or model.l_o != scene.l_o:
            raise ValueError("model horizon does not match the scene")
        needed = scene.l_i + scene.l_o + cfg.l_p - 1
        if scene.n_frames < needed:
            raise ValueError(
                f"scene has {scene.n_frames} frames, l_p={cfg.l_p} needs {needed}"
            )
        self.scene = scene
        self.model = model
        self.cfg = cfg
        self.l_i, self.l_o, self.l_p = scene.l_i, scene.l_o, cfg.l_p
        self.n_perturbed = self.l_i + self.l_p - 1
        self.alphas = list(range(self.l_i, self.l_i + self.l_p))

        target = scene.target.positions
        others = [t.positions for t in scene.others]
        self._base_hist = [target[a - self.l_i : a] for a in self.alphas]
        self._nbr_mean = [
            np.mean([o[a - 1] for o in others], axis=0) if others else None
            for a in self.alphas
        ]
        self._truth = [target[a : a + self.l_o] for a in self.alphas]
        if cfg.future_source == "self_predicted":
            self._ref = [
                model.predict_one(h, nb) for h, nb in zip(self._base_hist, self._nbr_mean)
            ]
        else:
            self._ref = self._truth

        # For directional objectives the metric is linear in the
        # prediction: cache the signed projection axis per frame.
        self._axes = None
        if cfg.objective in DIRECTIONS:
            self._axes = []
            for ref in self._ref:
                u = unit_directions(ref, scene.frequency_hz)
                if cfg.objective in ("left", "right"):
                    axis = left_normal(u)
                    sign = 1.0 if cfg.objective == "left" else -1.0
                else:
                    axis = u
                    sign = 1.0 if cfg.objective == "front" else -1.0
                self._axes.append(sign * axis)

    def _predictions(self, delta: np.ndarray) -> list[np.ndarray]:
        preds = []
        for i, a in enumerate(self.alphas):
            hist = self._base_hist[i] + delta[a - self.l_i : a]
            preds.append(self.model.predict_one(hist, self._nbr_mean[i]))
        return preds

    def _metric_and_grad(self, pred: np.ndarray, ref: np.ndarray, i: int, want_grad: bool):
        name = self.cfg.objective
        if self._axes is not None:
            diff = pred - ref
            value = float(np.mean(np.einsum("ij,ij->i", diff, self._axes[i])))
            grad = self._axes[i] / self.l_o if want_grad else None
            return value, grad
        if name == "ade":
            diff = pred - ref
            dist = np.linalg.norm(diff, axis=1)
            value = float(np.mean(dist))
            if not want_grad:
                return value, None
            safe = np.where(dist > 0, dist, 1.0)
            grad = diff / (self.l_o * safe[:, None])
            grad[dist == 0] = 0.0
            return value, grad
        # fde
        diff = pred[-1] - ref[-1]
        dist = float(np.linalg.norm(diff))
        value = dist
        if not want_grad:
            return value, None
        grad = np.zeros_like(pred)
        if dist > 0:
            grad[-1] = diff / dist
        return value, grad

    def loss(self, delta: np.ndarray) -> float:
        total = 0.0
        for i, pred in enumerate(self._predictions(delta)):
            value, _ = self._metric_and_grad(pred, self._ref[i], i, want_grad=False)
            total += value
        return -total / self.l_p

    def loss_and_grad(self, delta: np.ndarray) -> tuple[float, np.ndarray]:
        total = 0.0
        grad = np.zeros((self.n_perturbed, 2))
        for i, a in enumerate(self.alphas):
            hist = self._base_hist[i] + delta[a - self.l_i : a]
            pred = self.model.predict_one(hist, self._nbr_mean[i])
            value, dmetric = self._metric_and_grad(pred, self._ref[i], i, want_grad=True)
            total += value
            dloss = -dmetric / self.l_p
            grad[a - self.l_i : a] += self.model.gradient_one(hist, self._nbr_mean[i], dloss)
        return -total / self.l_p, grad

    def report(self, delta: np.ndarray) -> tuple[ErrorReport, np.ndarray]:
        """Six-metric report against ground truth, averaged over the l_p
        evaluation frames, plus the raw predictions."""
        preds = self._predictions(delta)
        reports = [
            error_report(p, t, self.scene.frequency_hz) for p, t in zip(preds, self._truth)
        ]
        return mean_report(reports), np.array(preds)


def objective_value(scene: Scene, delta: np.ndarray, model: Predictor, cfg: AttackConfig) -> float:
    """Loss of one perturbation: -(mean targeted metric over the l_p
    evaluation frames).  Convenience wrapper for tests and callers that do
    not need the cached evaluator."""
    delta = np.asarray(delta, dtype=float)
    ev = ObjectiveEvaluator(scene, model, cfg)
    if delta.shape != (ev.n_perturbed, 2):
        raise ValueError(f"delta must have shape ({ev.n_perturbed}, 2)")
    return ev.loss(delta)


def _finish(
    ev: ObjectiveEvaluator,
    best_delta: np.ndarray,
    best_loss: float,
    base_loss: float,
    trace: list[float],
    thetas: list[float],
) -> AttackResult:
    scene, cfg = ev.scene, ev.cfg
    before, pred_before = ev.report(np.zeros_like(best_delta))
    after, pred_after = ev.report(best_delta)
    feas = check_feasible(scene, best_delta, cfg.constraints)
    theta = {
        "mean": float(np.mean(thetas)) if thetas else 1.0,
        "min": float(np.min(thetas)) if thetas else 1.0,
        "last": float(thetas[-1]) if thetas else 1.0,
    }
    return AttackResult(
        perturbation=best_delta,
        theta=theta,
        objective_trace=trace,
        baseline_objective=base_loss,
        best_objective=best_loss,
        before=before,
        after=after,
        feasibility=feas,
        pred_before=pred_before,
        pred_after=pred_after,
        config=cfg,
        scene_id=scene.scene_id,
        model_kind=ev.model.kind,
    )


def pgd_attack(scene: Scene, model: Predictor, cfg: AttackConfig) -> AttackResult:
    """White-box attack: projected gradient steps with Adam moments.

    Each iteration projects the current delta to the feasible set,
    evaluates loss and gradient there (the projection is treated as
    identity for the backward pass), and steps from the projected point.
    """
    ev = ObjectiveEvaluator(scene, model, cfg)
    cons = cfg.constraints
    target_pos = scene.target.positions
    rng = np.random.default_rng(cfg.seed)
    p = cfg.pgd

    zero = np.zeros((ev.n_perturbed, 2))
    base_loss = ev.loss(zero)
    best_delta, best_loss = zero, base_loss

    delta = rng.uniform(-INIT_BOX, INIT_BOX, size=(ev.n_perturbed, 2))
    m = np.zeros_like(delta)
    v = np.zeros_like(delta)
    trace: list[float] = []
    thetas: list[float] = []

    for step in range(1, p.max_iter + 1):
        delta_p, theta = project_positions(target_pos, delta, scene.frequency_hz, cons)
        loss, grad = ev.loss_and_grad(delta_p)
        thetas.append(theta)
        if loss < best_loss:
            best_delta, best_loss = delta_p, loss
        # trace records the running best, same convention as the swarm
        trace.append(best_loss)
        m = p.beta1 * m + (1.0 - p.beta1) * grad
        v = p.beta2 * v + (1.0 - p.beta2) * grad * grad
        mhat = m / (1.0 - p.beta1**step)
        vhat = v / (1.0 - p.beta2**step)
        delta = delta_p - p.learning_rate * mhat / (np.sqrt(vhat) + p.eps)

    return _finish(ev, best_delta, best_loss, base_loss, trace, thetas)


def pso_attack(scene: Scene, model: Predictor, cfg: AttackConfig) -> AttackResult:
    """Black-box attack: particle swarm over the perturbation box.

    Particles start uniform in the per-frame deviation box (particle 0 at
    zero), velocities start at zero and are clamped per coordinate to the
    deviation cap.  Every particle is projected to the feasible set before
    evaluation and continues from the projected point.
    """
    ev = ObjectiveEvaluator(scene, model, cfg)
    cons = cfg.constraints
    target_pos = scene.target.positions
    rng = np.random.default_rng(cfg.seed)
    p = cfg.pso

    shape = (p.particles, ev.n_perturbed, 2)
    x = rng.uniform(-cons.max_deviation, cons.max_deviation, size=shape)
    x[0] = 0.0
    vel = np.zeros(shape)
    thetas: list[float] = []

    def project_all(cand: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = np.empty_like(cand)
        scores = np.empty(len(cand))
        for i, c in enumerate(cand):
            proj, theta = project_positions(target_pos, c, scene.frequency_hz, cons)
            thetas.append(theta)
            out[i] = proj
            scores[i] = ev.loss(proj)
        return out, scores

    x, scores = project_all(x)
    base_loss = scores[0]  # particle 0 is the zero candidate
    pbest = x.copy()
    pbest_scores = scores.copy()
    g = int(np.argmin(pbest_scores))
    gbest, gbest_score = pbest[g].copy(), float(pbest_scores[g])
    trace: list[float] = []

    for _ in range(p.max_iter):
        r1 = rng.uniform(size=shape)
        r2 = rng.uniform(size=shape)
        vel = (
            p.inertia * vel
            + p.cognitive * r1 * (pbest - x)
            + p.social * r2 * (gbest[None] - x)
        )
        np.clip(vel, -cons.max_deviation, cons.max_deviation, out=vel)
        x = x + vel
        x, scores = project_all(x)
        better = scores < pbest_scores
        pbest[better] = x[better]
        pbest_scores[better] = scores[better]
        g = int(np.argmin(pbest_scores))
        if pbest_scores[g] < gbest_score:
            gbest, gbest_score = pbest[g].copy(), float(pbest_scores[g])
        trace.append(gbest_score)

    return _finish(ev, gbest, gbest_score, float(base_loss), trace, thetas)


def run_attack(scene: Scene, model: Predictor, cfg: AttackConfig) -> AttackResult:
    """Dispatch on cfg.optimizer."""
    if cfg.optimizer == "pgd":
        return pgd_attack(scene, model, cfg)
    return pso_attack(scene, model, cfg)
