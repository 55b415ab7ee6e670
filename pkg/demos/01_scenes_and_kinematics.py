"""
Synthetic scene corpora and the physics behind the feasible set
===============================================================

Every attack in this package is constrained by what a real vehicle can
do.  This script generates scenes, inspects their kinematics, and shows
how the feasibility check rejects perturbations that break physics.
"""

import numpy as np

import trajattack as ta

np.set_printoptions(precision=3, suppress=True)

# one scene per maneuver family, all on the apolloscape-like preset
# (6 observed frames, 6 predicted frames, 2 Hz)
for family in ta.FAMILIES:
    scene = ta.generate_scene("apolloscape_like", family, seed=42)
    pos = scene.target.positions
    net = np.linalg.norm(pos[-1] - pos[0])
    steps = np.diff(pos, axis=0)
    moving = steps[np.linalg.norm(steps, axis=1) > 0.1]  # heading is noise when parked
    angles = np.unwrap(np.arctan2(moving[:, 1], moving[:, 0]))
    heading_span = np.degrees(angles.max() - angles.min())
    print(f"{family:<12} frames={scene.n_frames}  neighbors={len(scene.others)}  "
          f"net displacement={net:6.1f} m  heading span={heading_span:5.1f} deg")

print()

# kinematic profile of one history: speeds, accelerations, jerks
scene = ta.generate_scene("apolloscape_like", "turn", seed=7)
profile = ta.kinematics(scene.target.positions[: scene.l_i], scene.frequency_hz)
print("turn scene, observed window:")
print("  speed      ", profile.speed)
print("  long accel ", profile.long_accel)
print("  lat accel  ", profile.lat_accel)
print("  long jerk  ", profile.long_jerk)

# the preset ships hand-set bounds; estimate_bounds recovers comparable
# numbers empirically from a corpus, which is how you would calibrate
# against a recorded dataset
corpus = ta.generate_corpus("apolloscape_like", seed=0, count=50)
fitted = ta.estimate_bounds(corpus)
shipped = ta.preset_bounds("apolloscape_like")
print()
print(f"{'bound':<16}{'preset':>10}{'estimated':>12}")
for name in ("max_speed", "max_long_accel", "max_lat_accel", "max_long_jerk", "max_lat_jerk"):
    print(f"{name:<16}{getattr(shipped, name):>10.2f}{getattr(fitted, name):>12.2f}")

# feasibility: a gentle nudge passes, a teleport does not
cons = ta.PerturbationConstraints(bounds=shipped, max_deviation=1.0)
rng = np.random.default_rng(3)
gentle = rng.normal(0.0, 0.05, size=(scene.l_i, 2))
teleport = np.zeros((scene.l_i, 2))
teleport[3] = (40.0, 0.0)

for label, delta in (("gentle", gentle), ("teleport", teleport)):
    verdict = ta.check_feasible(scene, delta, cons)
    print()
    print(f"{label}: feasible={verdict.feasible}")
    for v in verdict.violations[:3]:
        print(f"  violates {v.prop} at frame {v.frame}: {v.value:.1f} > {v.bound:.1f}")
