"""Built-in trajectory predictors with exact input gradients.

Every predictor maps per-object histories of length l_i to per-object
predicted trajectories of length l_o and can differentiate the target's
prediction with respect to the target's own history coordinates.  The
closed-form models extrapolate the last displacement (constant velocity)
or the last displacement plus its change (constant acceleration).  The
neural model is a small two-hidden-layer tanh network over displacement
features plus a mean relative neighbor position, predicting per-frame
displacement deltas accumulated from the last observed position, which
makes all three models translation equivariant by construction.

When an input smoother is attached, the model's function is the core
model composed with the smoothing matrix, and gradients include the
smoother transpose, so an attacker optimizing through the model is
automatically aware of the smoothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .scene import Scene
from .smoothing import SmootherSpec

MODEL_KINDS = ("constant_velocity", "constant_acceleration", "neural")

# Inputs are meters; this fixed scale keeps displacement features inside
# the responsive range of tanh at urban speeds.
FEATURE_SCALE = 0.1


class GradientUnavailable(RuntimeError):
    """The predictor cannot provide input gradients."""


@dataclass(frozen=True)
class PredictionRequest:
    """Histories of every scene object at one prediction frame."""

    histories: dict[str, np.ndarray]
    target_id: str
    l_o: int

    def __post_init__(self):
        if self.target_id not in self.histories:
            raise ValueError(f"target {self.target_id!r} missing from histories")
        if self.l_o < 1:
            raise ValueError("l_o must be >= 1")
        lengths = set()
        clean = {}
        for oid, h in self.histories.items():
            h = np.asarray(h, dtype=float)
            if h.ndim != 2 or h.shape[1] != 2:
                raise ValueError(f"history {oid!r} must have shape (l_i, 2)")
            if not np.all(np.isfinite(h)):
                raise ValueError(f"history {oid!r} has non-finite coordinates")
            lengths.add(h.shape[0])
            clean[oid] = h
        if len(lengths) != 1:
            raise ValueError("all histories must share one length")
        if lengths.pop() < 2:
            raise ValueError("histories need at least 2 frames")
        object.__setattr__(self, "histories", clean)

    @property
    def l_i(self) -> int:
        return next(iter(self.histories.values())).shape[0]

    @staticmethod
    def from_scene(scene: Scene, frame: int | None = None) -> "PredictionRequest":
        """Histories ending just before ``frame`` (default: the first
        prediction frame, l_i)."""
        alpha = scene.l_i if frame is None else frame
        if alpha < scene.l_i or alpha + scene.l_o > scene.n_frames:
            raise ValueError(
                f"frame {alpha} leaves no full history/future inside the scene"
            )
        histories = {
            t.object_id: t.positions[alpha - scene.l_i : alpha] for t in scene.trajectories
        }
        return PredictionRequest(histories=histories, target_id=scene.target_id, l_o=scene.l_o)


def _neighbor_last_mean(req: PredictionRequest, object_id: str) -> np.ndarray | None:
    others = [h[-1] for oid, h in req.histories.items() if oid != object_id]
    if not others:
        return None
    return np.mean(others, axis=0)


class Predictor:
    """Interface shared by all predictors.

    Subclasses implement ``_core_predict`` and ``_core_gradient`` on an
    already-smoothed history; this base class owns request handling and
    the smoothing composition.
    """

    kind = "base"

    def __init__(self, l_i: int, l_o: int, smoother: SmootherSpec | None = None):
        if l_i < 2 or l_o < 1:
            raise ValueError("need l_i >= 2 and l_o >= 1")
        self.l_i = l_i
        self.l_o = l_o
        self.smoother = smoother
        self._smooth_matrix = None if smoother is None else smoother.matrix(l_i)

    # -- per-history api ------------------------------------------------

    def predict_one(self, history: np.ndarray, neighbor_last_mean: np.ndarray | None = None) -> np.ndarray:
        """Predicted (l_o, 2) positions for a single (l_i, 2) history."""
        history = np.asarray(history, dtype=float)
        if history.shape != (self.l_i, 2):
            raise ValueError(f"history must have shape ({self.l_i}, 2)")
        if self._smooth_matrix is not None:
            history = self._smooth_matrix @ history
        pred = self._core_predict(history, neighbor_last_mean)
        if pred.shape != (self.l_o, 2) or not np.all(np.isfinite(pred)):
            raise RuntimeError("predictor produced malformed output")
        return pred

    def gradient_one(
        self,
        history: np.ndarray,
        neighbor_last_mean: np.ndarray | None,
        output_gradient: np.ndarray,
    ) -> np.ndarray:
        """Exact d(sum(output_gradient * prediction)) / d(history)."""
        history = np.asarray(history, dtype=float)
        output_gradient = np.asarray(output_gradient, dtype=float)
        if output_gradient.shape != (self.l_o, 2):
            raise ValueError(f"output_gradient must have shape ({self.l_o}, 2)")
        smoothed = history if self._smooth_matrix is None else self._smooth_matrix @ history
        grad = self._core_gradient(smoothed, neighbor_last_mean, output_gradient)
        if self._smooth_matrix is not None:
            grad = self._smooth_matrix.T @ grad
        return grad

    # -- request api ----------------------------------------------------

    def predict(self, req: PredictionRequest) -> dict[str, np.ndarray]:
        """One predicted trajectory per object in the request."""
        if req.l_i != self.l_i or req.l_o != self.l_o:
            raise ValueError(
                f"request shape (l_i={req.l_i}, l_o={req.l_o}) does not match "
                f"model (l_i={self.l_i}, l_o={self.l_o})"
            )
        return {
            oid: self.predict_one(h, _neighbor_last_mean(req, oid))
            for oid, h in req.histories.items()
        }

    def input_gradient(self, req: PredictionRequest, loss_gradient: np.ndarray) -> np.ndarray:
        """Gradient of the target's prediction, composed with per-output
        sensitivities ``loss_gradient`` (l_o, 2), with respect to every
        history coordinate of the target: shape (l_i, 2)."""
        if req.l_i != self.l_i or req.l_o != self.l_o:
            raise ValueError("request shape does not match model")
        h = req.histories[req.target_id]
        return self.gradient_one(h, _neighbor_last_mean(req, req.target_id), loss_gradient)

    # -- hooks ------------------------------------------------------------

    def _core_predict(self, history: np.ndarray, neighbor_last_mean) -> np.ndarray:
        raise NotImplementedError

    def _core_gradient(self, history: np.ndarray, neighbor_last_mean, g: np.ndarray) -> np.ndarray:
        raise GradientUnavailable(f"{self.kind} has no gradient")


class ConstantVelocityPredictor(Predictor):
    """Extrapolates the last observed displacement."""

    kind = "constant_velocity"

    def _core_predict(self, history, neighbor_last_mean):
        v = history[-1] - history[-2]
        k = np.arange(1, self.l_o + 1)[:, None]
        return history[-1] + k * v

    def _core_gradient(self, history, neighbor_last_mean, g):
        # pred_k = (1 + k) h[-1] - k h[-2]
        k = np.arange(1, self.l_o + 1)[:, None]
        grad = np.zeros((self.l_i, 2))
        grad[-1] = np.sum((1 + k) * g, axis=0)
        grad[-2] = np.sum(-k * g, axis=0)
        return grad


class ConstantAccelerationPredictor(Predictor):
    """Extrapolates the last displacement and its change."""

    kind = "constant_acceleration"

    def __init__(self, l_i: int, l_o: int, smoother: SmootherSpec | None = None):
        if l_i < 3:
            raise ValueError("constant acceleration needs l_i >= 3")
        super().__init__(l_i, l_o, smoother)

    def _core_predict(self, history, neighbor_last_mean):
        v = history[-1] - history[-2]
        a = history[-1] - 2.0 * history[-2] + history[-3]
        k = np.arange(1, self.l_o + 1)[:, None]
        return history[-1] + k * v + 0.5 * k * (k + 1) * a

    def _core_gradient(self, history, neighbor_last_mean, g):
        k = np.arange(1, self.l_o + 1)[:, None]
        c = 0.5 * k * (k + 1)
        grad = np.zeros((self.l_i, 2))
        grad[-1] = np.sum((1 + k + c) * g, axis=0)
        grad[-2] = np.sum((-k - 2.0 * c) * g, axis=0)
        grad[-3] = np.sum(c * g, axis=0)
        return grad


class NeuralPredictor(Predictor):
    """Two-hidden-layer tanh network over displacement features.

    Input: 2 (l_i - 1) scaled per-frame displacements of the history plus
    the scaled mean position of the other objects relative to the last
    history point (zeros when the object is alone).  Output: 2 l_o
    displacement deltas accumulated from the last history point.
    """

    kind = "neural"
    hidden = 64

    def __init__(
        self,
        l_i: int,
        l_o: int,
        smoother: SmootherSpec | None = None,
        seed: int = 0,
        weights: list[np.ndarray] | None = None,
        biases: list[np.ndarray] | None = None,
    ):
        super().__init__(l_i, l_o, smoother)
        self.d_in = 2 * (l_i - 1) + 2
        self.d_out = 2 * l_o
        if weights is None:
            rng = np.random.default_rng(seed)
            dims = [self.d_in, self.hidden, self.hidden, self.d_out]
            weights, biases = [], []
            for fan_in, fan_out in zip(dims[:-1], dims[1:]):
                scale = 1.0 / np.sqrt(fan_in)
                weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
                biases.append(np.zeros(fan_out))
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        shapes = [w.shape for w in self.weights]
        expect = [(self.hidden, self.d_in), (self.hidden, self.hidden), (self.d_out, self.hidden)]
        if shapes != expect or [b.shape[0] for b in self.biases] != [s[0] for s in expect]:
            raise ValueError(f"bad layer shapes {shapes}, expected {expect}")

    # -- features ---------------------------------------------------------

    def _features(self, history: np.ndarray, neighbor_last_mean) -> np.ndarray:
        disp = np.diff(history, axis=0).ravel()
        if neighbor_last_mean is None:
            rel = np.zeros(2)
        else:
            rel = np.asarray(neighbor_last_mean, dtype=float) - history[-1]
        return FEATURE_SCALE * np.concatenate([disp, rel])

    def _forward(self, x: np.ndarray):
        w1, w2, w3 = self.weights
        b1, b2, b3 = self.biases
        a1 = np.tanh(x @ w1.T + b1)
        a2 = np.tanh(a1 @ w2.T + b2)
        y = a2 @ w3.T + b3
        return y, (x, a1, a2)

    def forward_batch(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Raw network output (batch, 2 l_o) with the cache needed by
        ``backward_batch``.  Used by the trainer."""
        return self._forward(x)

    def backward_batch(self, cache: tuple, dy: np.ndarray):
        """Weight/bias/input gradients from output sensitivities dy."""
        x, a1, a2 = cache
        w1, w2, w3 = self.weights
        dw3 = dy.T @ a2
        db3 = dy.sum(axis=0)
        da2 = (dy @ w3) * (1.0 - a2 * a2)
        dw2 = da2.T @ a1
        db2 = da2.sum(axis=0)
        da1 = (da2 @ w2) * (1.0 - a1 * a1)
        dw1 = da1.T @ x
        db1 = da1.sum(axis=0)
        dx = da1 @ w1
        return [dw1, dw2, dw3], [db1, db2, db3], dx

    # -- predictor interface ----------------------------------------------

    def _core_predict(self, history, neighbor_last_mean):
        x = self._features(history, neighbor_last_mean)
        y, _ = self._forward(x[None])
        deltas = y[0].reshape(self.l_o, 2)
        return history[-1] + np.cumsum(deltas, axis=0)

    def _core_gradient(self, history, neighbor_last_mean, g):
        x = self._features(history, neighbor_last_mean)
        _, cache = self._forward(x[None])
        # Positions accumulate deltas, so delta j collects every later
        # output sensitivity; the last history point feeds every output.
        ddeltas = np.cumsum(g[::-1], axis=0)[::-1]
        _, _, dx = self.backward_batch(cache, ddeltas.reshape(1, -1))
        dx = dx[0]
        grad = np.zeros((self.l_i, 2))
        ddisp = FEATURE_SCALE * dx[: 2 * (self.l_i - 1)].reshape(self.l_i - 1, 2)
        grad[1:] += ddisp
        grad[:-1] -= ddisp
        if neighbor_last_mean is not None:
            grad[-1] -= FEATURE_SCALE * dx[2 * (self.l_i - 1) :]
        grad[-1] += g.sum(axis=0)
        return grad


def make_predictor(kind: str, l_i: int, l_o: int, smoother: SmootherSpec | None = None, seed: int = 0) -> Predictor:
    if kind == "constant_velocity":
        return ConstantVelocityPredictor(l_i, l_o, smoother)
    if kind == "constant_acceleration":
        return ConstantAccelerationPredictor(l_i, l_o, smoother)
    if kind == "neural":
        return NeuralPredictor(l_i, l_o, smoother, seed=seed)
    raise ValueError(f"unknown model kind {kind!r}, have {MODEL_KINDS}")


# -- training ---------------------------------------------------------------


@dataclass
class TrainOptions:
    epochs: int = 100
    learning_rate: float = 3e-3
    batch_size: int = 64
    seed: int = 0
    # Called per training window as hook(window, rng) -> window, where the
    # window stacks history and future positions.  Gets its own rng stream
    # so a no-op hook reproduces the unaugmented run exactly.
    augmentation: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None
    smoothing: SmootherSpec | None = None


def _windows(scenes: list[Scene]) -> list[tuple[Scene, int, str]]:
    out = []
    for scene in scenes:
        for alpha in range(scene.l_i, scene.n_frames - scene.l_o + 1):
            for traj in scene.trajectories:
                if traj.kind == "vehicle":
                    out.append((scene, alpha, traj.object_id))
    return out


def train(
    model: Predictor,
    scenes: list[Scene],
    opts: TrainOptions | None = None,
) -> tuple[Predictor, list[float]]:
    """Fit the neural predictor by minimizing mean squared position error
    over all sliding windows of the dataset.

    Returns the model (mutated in place) and the loss history: the
    pre-training loss followed by one mean minibatch loss per epoch, so
    epochs=0 still yields a one-entry history and an untouched model.
    """
    opts = opts or TrainOptions()
    if not isinstance(model, NeuralPredictor):
        raise TypeError(f"{model.kind} has no trainable parameters")
    if not scenes:
        raise ValueError("no training scenes")
    if opts.smoothing is not None:
        model.smoother = opts.smoothing
        model._smooth_matrix = opts.smoothing.matrix(model.l_i)

    samples = _windows(scenes)
    if not samples:
        raise ValueError("dataset yields no training windows")
    data_rng = np.random.default_rng([opts.seed, 1])
    hook_rng = np.random.default_rng([opts.seed, 2])

    def assemble(idx: np.ndarray, rng_for_hook) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        feats, lasts, futs = [], [], []
        for i in idx:
            scene, alpha, oid = samples[i]
            traj = scene.trajectory(oid)
            window = traj.positions[alpha - scene.l_i : alpha + scene.l_o]
            if opts.augmentation is not None and rng_for_hook is not None:
                window = opts.augmentation(window, rng_for_hook)
            history = window[: scene.l_i]
            if model._smooth_matrix is not None:
                history = model._smooth_matrix @ history
            others = [
                t.positions[alpha - 1]
                for t in scene.trajectories
                if t.object_id != oid
            ]
            nbr = np.mean(others, axis=0) if others else None
            feats.append(model._features(history, nbr))
            lasts.append(history[-1])
            futs.append(window[scene.l_i :])
        return np.array(feats), np.array(lasts), np.array(futs)

    def batch_loss_and_grads(x, last, fut):
        y, cache = model.forward_batch(x)
        deltas = y.reshape(-1, model.l_o, 2)
        pred = last[:, None, :] + np.cumsum(deltas, axis=1)
        err = pred - fut
        loss = float(np.mean(err**2))
        dpred = 2.0 * err / err.size
        ddeltas = np.cumsum(dpred[:, ::-1], axis=1)[:, ::-1]
        dw, db, _ = model.backward_batch(cache, ddeltas.reshape(len(x), -1))
        return loss, dw, db

    # Initial loss on the raw dataset, before any training step.
    all_idx = np.arange(len(samples))
    x0, last0, fut0 = assemble(all_idx, None)
    loss0, _, _ = batch_loss_and_grads(x0, last0, fut0)
    history = [loss0]

    m_w = [np.zeros_like(w) for w in model.weights]
    v_w = [np.zeros_like(w) for w in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    for _ in range(opts.epochs):
        order = data_rng.permutation(len(samples))
        epoch_losses = []
        for start in range(0, len(order), opts.batch_size):
            idx = order[start : start + opts.batch_size]
            x, last, fut = assemble(idx, hook_rng)
            loss, dw, db = batch_loss_and_grads(x, last, fut)
            epoch_losses.append(loss)
            step += 1
            for params, grads, ms, vs in (
                (model.weights, dw, m_w, v_w),
                (model.biases, db, m_b, v_b),
            ):
                for p, g, m, v in zip(params, grads, ms, vs):
                    m *= beta1
                    m += (1 - beta1) * g
                    v *= beta2
                    v += (1 - beta2) * g * g
                    mhat = m / (1 - beta1**step)
                    vhat = v / (1 - beta2**step)
                    p -= opts.learning_rate * mhat / (np.sqrt(vhat) + eps)
        history.append(float(np.mean(epoch_losses)))
    return model, history


# -- checkpoints -------------------------------------------------------------


def save_model(model: Predictor, path: str | Path) -> None:
    """Write a model checkpoint: kind, shapes, row-major weights."""
    data: dict = {"kind": model.kind, "l_i": model.l_i, "l_o": model.l_o}
    if model.smoother is not None:
        data["smoother"] = list(model.smoother.kernel)
    if isinstance(model, NeuralPredictor):
        data["layers"] = [
            {
                "shape": list(w.shape),
                "weights": [float(v) for v in w.ravel()],
                "bias": [float(v) for v in b],
            }
            for w, b in zip(model.weights, model.biases)
        ]
    Path(path).write_text(json.dumps(data) + "\n")


def load_model(source: str | Path | dict) -> Predictor:
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    for key in ("kind", "l_i", "l_o"):
        if key not in data:
            raise ValueError(f"model checkpoint missing {key!r}")
    kind = data["kind"]
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    smoother = None
    if data.get("smoother") is not None:
        smoother = SmootherSpec(tuple(data["smoother"]))
    l_i, l_o = int(data["l_i"]), int(data["l_o"])
    if kind != "neural":
        return make_predictor(kind, l_i, l_o, smoother)
    weights, biases = [], []
    for layer in data["layers"]:
        shape = tuple(layer["shape"])
        weights.append(np.array(layer["weights"], dtype=float).reshape(shape))
        biases.append(np.array(layer["bias"], dtype=float))
    return NeuralPredictor(l_i, l_o, smoother, weights=weights, biases=biases)
