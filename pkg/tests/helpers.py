"""Shared fixtures-in-code for the test suite."""

from functools import lru_cache

import numpy as np

from adap.diffusion.planner import train
from adap.diffusion.training import TrainConfig
from adap.domain import ActionPlan, LabeledDemoSet

LIMITS = np.array([[-2.9, 2.9], [-1.7, 1.7], [-2.6, 2.6], [-2.8, 2.8]])


def tiny_demos(n=4, h=24, j=4, seed=0):
    rng = np.random.default_rng(seed)
    plans = []
    for _ in range(n):
        base = rng.uniform(-0.6, 0.6, j)
        wave = np.sin(np.linspace(0, 2 * np.pi, h))[:, None] * rng.uniform(0.1, 0.4, j)
        plans.append(ActionPlan(frames=base + wave, dt=0.02))
    results = rng.uniform(-0.4, 0.4, (n, 2))
    return LabeledDemoSet(plans=tuple(plans), results=results)


def small_config(**kw):
    d = dict(batch_size=32, epochs=120, warmup_steps=20, hidden_width=32,
             embed_dim=8, shift_upperbound=4, seed=0)
    d.update(kw)
    return TrainConfig(**d)


@lru_cache(maxsize=1)
def tiny_planner():
    """A small trained planner, built once per test session."""
    return train(tiny_demos(), small_config(epochs=200), LIMITS)
