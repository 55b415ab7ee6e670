"""Shared builders and fixtures.

Heavy fixtures (corpora, trained models) are session-scoped and lazy, so
unit-test runs that do not touch them pay nothing.
"""

import numpy as np
import pytest

from trajattack import (
    PerturbationConstraints,
    PhysicalBounds,
    Scene,
    Trajectory,
    generate_corpus,
    preset_bounds,
)


def straight_positions(n, speed=10.0, f=2.0, start=(0.0, 0.0), direction=(1.0, 0.0)):
    """Constant-speed straight line sampled at f Hz."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    t = np.arange(n, dtype=float)[:, None] / f
    return np.asarray(start, dtype=float)[None, :] + speed * t * d[None, :]


def make_straight_scene(l_i=6, l_o=6, extra=5, f=2.0, speed=10.0, neighbors=1,
                        scene_id="straight", direction=(1.0, 0.0), start=(0.0, 0.0)):
    n = l_i + l_o + extra
    trajs = [Trajectory("target", "vehicle", straight_positions(n, speed, f, start, direction))]
    for k in range(neighbors):
        off = np.array([0.0, 3.7 * (k + 1)])
        trajs.append(
            Trajectory(f"nbr{k}", "vehicle",
                       straight_positions(n, speed, f, start, direction) + off)
        )
    return Scene(frequency_hz=f, l_i=l_i, l_o=l_o, target_id="target",
                 trajectories=tuple(trajs), scene_id=scene_id)


# Physical bounds so large that only the deviation cap can bind.
def slack_bounds():
    return PhysicalBounds(
        max_speed=1e9, max_long_accel=1e9, max_lat_accel=1e9,
        max_long_jerk=1e9, max_lat_jerk=1e9,
    )


@pytest.fixture(scope="session")
def apollo_bounds():
    return preset_bounds("apolloscape_like")


@pytest.fixture(scope="session")
def apollo_cons(apollo_bounds):
    return PerturbationConstraints(bounds=apollo_bounds, max_deviation=1.0)


@pytest.fixture(scope="session")
def small_corpus():
    # 10 scenes covering all five families twice.
    return generate_corpus("apolloscape_like", seed=7, count=10)
