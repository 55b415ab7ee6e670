"""
Attacking one scene: objectives, optimizers, feasibility
========================================================

A single-frame attack perturbs the target's observed history so the
model mispredicts its future.  The perturbation must stay physically
plausible: the projection step shrinks any candidate until speed,
acceleration, jerk, and total deviation all clear their bounds.
"""

import numpy as np

import trajattack as ta

scene = ta.generate_scene("apolloscape_like", "lane_change", seed=12)
model = ta.make_predictor("neural", 6, 6, seed=9)
model, _ = ta.train(model, ta.generate_corpus("apolloscape_like", seed=0, count=60),
                    ta.TrainOptions(epochs=100, seed=9))

cons = ta.PerturbationConstraints(
    bounds=ta.preset_bounds("apolloscape_like"), max_deviation=1.0
)

# maximize average displacement error with projected gradient descent;
# internally the optimizer minimizes the negated objective, so lower
# trace values mean a stronger attack
cfg = ta.AttackConfig(constraints=cons, objective="ade", optimizer="pgd", seed=4)
result = ta.run_attack(scene, model, cfg)
print(f"prediction error before/after: ade {result.before.ade:.3f} / {result.after.ade:.3f}, "
      f"fde {result.before.fde:.3f} / {result.after.fde:.3f}")
print(f"perturbation per-frame norms: "
      f"{np.round(np.linalg.norm(result.perturbation, axis=1), 3)}")
print(f"feasible: {result.feasibility.feasible}  "
      f"(projection shrink theta: mean {result.theta['mean']:.3f}, "
      f"min {result.theta['min']:.3f})")
print()

# directional objectives push the prediction a specific way; attacking
# "left" drives the left metric up without caring about raw distance
for objective in ("left", "rear"):
    cfg = ta.AttackConfig(constraints=cons, objective=objective, optimizer="pgd", seed=4)
    r = ta.run_attack(scene, model, cfg)
    print(f"{objective:>5} objective: metric {getattr(r.before, objective):+.3f} -> "
          f"{getattr(r.after, objective):+.3f}")
print()

# particle swarm search needs no gradients; it trails PGD but gets most
# of the way there, which matters for models you can only query
for optimizer in ("pgd", "pso"):
    cfg = ta.AttackConfig(constraints=cons, objective="ade", optimizer=optimizer, seed=4)
    r = ta.run_attack(scene, model, cfg)
    print(f"{optimizer}: attacked ade {r.after.ade:.3f} "
          f"(objective trace {r.objective_trace[0]:.3f} -> "
          f"{r.objective_trace[-1]:.3f} in {len(r.objective_trace)} steps)")

# multi-frame attacks perturb one window and score it across l_p
# consecutive prediction frames, trading peak error for persistence;
# single-scene numbers are noisy, corpus averages decline smoothly
print()
for l_p in (1, 2, 3):
    cfg = ta.AttackConfig(constraints=cons, objective="ade", l_p=l_p, seed=4)
    r = ta.run_attack(scene, model, cfg)
    print(f"l_p={l_p}: attacked ade {r.after.ade:.3f}")
