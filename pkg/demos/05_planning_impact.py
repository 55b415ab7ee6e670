"""
From prediction error to braking decisions
==========================================

Prediction error only matters if it changes what the ego vehicle does.
Here an AV follows a lead vehicle at matched speed with a comfortable
gap.  A rear-directed attack on the lead's history drags its predicted
future back toward the AV, and the planner reacts to the phantom
obstacle with a brake it never needed.
"""

import numpy as np

import trajattack as ta

scene = ta.generate_scene("apolloscape_like", "straight", seed=21)
model = ta.make_predictor("constant_velocity", 6, 6)

# a fast AV closes on the slower lead; the planner sweeps a corridor
# one prediction horizon long and brakes for any predicted crossing,
# and the gap is chosen so the honest future ends just past that sweep
speed = float(np.linalg.norm(np.diff(scene.target.positions[:2], axis=0))
              * scene.frequency_hz)
av_speed = 26.0
span = av_speed * scene.l_o / scene.frequency_hz
gap = span - speed / scene.frequency_hz + 0.2
av = ta.av_behind_target(scene, gap=gap, velocity=av_speed)
print(f"lead at {speed:.1f} m/s, AV at {av_speed:.1f} m/s and {gap:.1f} m back; "
      f"corridor reaches {span:.0f} m")

cons = ta.PerturbationConstraints(
    bounds=ta.preset_bounds("apolloscape_like"), max_deviation=1.0
)
cfg = ta.AttackConfig(
    constraints=cons, objective="rear", seed=3,
    pgd=ta.PgdParams(max_iter=150),
)
result = ta.run_attack(scene, model, cfg)
print(f"rear attack shifted the prediction {result.after.rear:.2f} m backwards")
print()

impact = ta.impact_report(result, scene, av)
for label, verdict in (("before", impact.before), ("after", impact.after)):
    if not verdict.crossing:
        print(f"{label:<7} no predicted corridor crossing, severity {verdict.severity}")
    else:
        print(f"{label:<7} crossing at {verdict.crossing.distance:.1f} m "
              f"(frame {verdict.crossing.frame}), needs "
              f"{verdict.required_decel:.2f} m/s^2, severity {verdict.severity}")

# the same check on the honest future: no crossing, so every braking
# level the attacked prediction provokes is spurious
truth = scene.target.positions[scene.l_i : scene.l_i + scene.l_o]
honest = ta.assess_prediction(truth, av, scene.frequency_hz)
print()
print(f"ground-truth future severity: {honest.severity} "
      f"(crossing: {bool(honest.crossing)})")

# severity is a plain deceleration ladder
print()
for decel in (2.0, 4.0, 7.0, 12.0):
    print(f"required decel {decel:>5.1f} m/s^2 -> {ta.classify_severity(decel)}")
