"""
Detecting attacked histories and defending the predictor
========================================================

Adversarial histories carry a kinematic fingerprint: the optimizer
leaves behind more acceleration variance and jerk than natural driving.
That fingerprint feeds two mitigation layers, a detector and a
detect-then-smooth prediction pipeline; train-time augmentation hardens
the model itself.
"""

import numpy as np

import trajattack as ta
from trajattack.predictors import PredictionRequest

scenes = ta.generate_corpus("apolloscape_like", seed=0, count=60)
model = ta.make_predictor("neural", 6, 6, seed=5)
model, _ = ta.train(model, scenes, ta.TrainOptions(epochs=100, seed=5))

cons = ta.PerturbationConstraints(
    bounds=ta.preset_bounds("apolloscape_like"), max_deviation=1.0
)
cfg = ta.AttackConfig(constraints=cons, objective="ade", seed=2)

# attack every scene once to collect adversarial histories
normal, adversarial = [], []
for scene in scenes:
    r = ta.run_attack(scene, model, cfg)
    history = scene.target.positions[: scene.l_i]
    normal.append(history)
    adversarial.append(history + r.perturbation)

# the fingerprint, in numbers
f = scenes[0].frequency_hz
for label, group in (("normal", normal), ("attacked", adversarial)):
    feats = [ta.extract_features(h, f) for h in group]
    print(f"{label:<9} accel var {np.mean([x.accel_var for x in feats]):7.4f}   "
          f"jerk max {np.mean([x.jerk_max for x in feats]):7.4f}")
print()

# a one-feature threshold rule already separates the classes well
detector, roc = ta.train_detector(normal[:40], adversarial[:40], "rule_based", f)
held_scores = [ta.detect(h, detector, f) for h in normal[40:] + adversarial[40:]]
held_truth = [False] * 20 + [True] * 20
hits = sum(d.adversarial == t for d, t in zip(held_scores, held_truth))
print(f"rule detector: AUC {roc.auc:.3f}, threshold {detector.threshold:.4f}, "
      f"held-out accuracy {hits}/40")

# the kernel detector learns a boundary over all six features
kernel, kroc = ta.train_detector(normal[:40], adversarial[:40], "kernel_classifier", f, seed=1)
khits = sum(ta.detect(h, kernel, f).adversarial == t
            for h, t in zip(normal[40:] + adversarial[40:], held_truth))
print(f"kernel detector: AUC {kroc.auc:.3f}, held-out accuracy {khits}/40")
print()

# detect-then-smooth only pays the smoothing cost when the detector
# fires, so clean inputs pass through untouched
pipeline = ta.DefensePipeline(
    smoother=ta.SmootherSpec(), mode="detect_then_smooth",
    detector=kernel, frequency_hz=f,
)
scene = scenes[3]
r = ta.run_attack(scene, model, cfg)
truth = scene.target.positions[scene.l_i : scene.l_i + scene.l_o]

req = PredictionRequest.from_scene(scene.with_target_delta(r.perturbation))
naked = model.predict(req)[scene.target_id]
defended, flags = ta.defended_predict(model, req, pipeline)
print(f"attacked scene: ade {ta.error_report(naked, truth, f).ade:.3f} undefended, "
      f"{ta.error_report(defended[scene.target_id], truth, f).ade:.3f} defended "
      f"(detector fired: {flags[scene.target_id]})")

clean_req = PredictionRequest.from_scene(scene)
clean_def, clean_flags = ta.defended_predict(model, clean_req, pipeline)
clean = model.predict(clean_req)[scene.target_id]
print(f"clean scene:    ade {ta.error_report(clean, truth, f).ade:.3f} undefended, "
      f"{ta.error_report(clean_def[scene.target_id], truth, f).ade:.3f} defended "
      f"(detector fired: {clean_flags[scene.target_id]})")
print()

# train-time augmentation: fit on feasibly-jittered histories so the
# model stops trusting razor-precise inputs
hook = ta.make_augmenter(cons, f, scenes[0].l_i, probability=0.5)
hardened = ta.make_predictor("neural", 6, 6, seed=5)
hardened, _ = ta.train(hardened, scenes,
                       ta.TrainOptions(epochs=100, seed=5, augmentation=hook))
base_after = []
hard_after = []
for scene in scenes[:20]:
    base_after.append(ta.run_attack(scene, model, cfg).after.ade)
    hard_after.append(ta.run_attack(scene, hardened, cfg).after.ade)
print(f"attacked ade over 20 scenes: base model {np.mean(base_after):.3f}, "
      f"augmentation-trained {np.mean(hard_after):.3f}")
