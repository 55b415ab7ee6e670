"""
Three trajectory predictors on one corpus
=========================================

Constant velocity and constant acceleration need no training; the small
feedforward network learns residual corrections on displacement
features.  All three implement the same predict/gradient interface, so
everything downstream (attacks, defenses) is model-agnostic.
"""

import time

import numpy as np

import trajattack as ta
from trajattack.predictors import PredictionRequest

train_scenes = ta.generate_corpus("apolloscape_like", seed=0, count=80)
eval_scenes = ta.generate_corpus("apolloscape_like", seed=1, count=20)

models = {
    "constant_velocity": ta.make_predictor("constant_velocity", 6, 6),
    "constant_acceleration": ta.make_predictor("constant_acceleration", 6, 6),
    "neural": ta.make_predictor("neural", 6, 6, seed=5),
}

t0 = time.monotonic()
models["neural"], losses = ta.train(
    models["neural"], train_scenes, ta.TrainOptions(epochs=120, seed=5)
)
print(f"trained the network in {time.monotonic() - t0:.1f} s; "
      f"loss {losses[0]:.2f} -> {losses[-1]:.3f} over {len(losses)} epochs")
print()

# held-out accuracy, averaged over the evaluation corpus
print(f"{'model':<24}{'ADE':>8}{'FDE':>8}")
for name, model in models.items():
    reports = []
    for scene in eval_scenes:
        req = PredictionRequest.from_scene(scene)
        pred = model.predict(req)[scene.target_id]
        truth = scene.target.positions[scene.l_i : scene.l_i + scene.l_o]
        reports.append(ta.error_report(pred, truth, scene.frequency_hz))
    mean = ta.mean_report(reports)
    print(f"{name:<24}{mean.ade:>8.3f}{mean.fde:>8.3f}")

# the directional metrics split error along and across the intended
# path; on a clean model they hover near zero and mirror each other
scene = eval_scenes[0]
req = PredictionRequest.from_scene(scene)
pred = models["neural"].predict(req)[scene.target_id]
truth = scene.target.positions[scene.l_i : scene.l_i + scene.l_o]
report = ta.error_report(pred, truth, scene.frequency_hz)
print()
print(f"one scene, neural: left={report.left:+.3f} right={report.right:+.3f} "
      f"front={report.front:+.3f} rear={report.rear:+.3f}")
