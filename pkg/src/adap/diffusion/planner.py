"""The conditional action planner: train on demos, sample plans by condition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import ActionPlan, LabeledDemoSet, PlanNormalizer
from .network import NetShapes, NotTrainedError, forward
from .schedule import NoiseSchedule
from .training import TrainConfig, train_denoiser


@dataclass
class DiffusionPlanner:
    """Trained denoiser (train + EMA copies) plus everything sampling needs."""

    shapes: NetShapes
    schedule: NoiseSchedule
    params: dict
    ema_params: dict
    normalizer: PlanNormalizer
    horizon: int
    joint_count: int
    dt: float
    joint_limits: np.ndarray
    config: TrainConfig
    losses: np.ndarray | None = None

    def sample(self, condition, seed) -> ActionPlan:
        return sample(self, condition, seed)

    # duck-typed planner interface used by the adaptation loop
    def generate(self, condition, seed) -> ActionPlan:
        return self.sample(condition, seed)


def train(demos: LabeledDemoSet, cfg: TrainConfig, joint_limits) -> DiffusionPlanner:
    """Stage-1 motion pattern learning over the labeled demo set."""
    shapes, params, ema_params, normalizer, schedule, losses = train_denoiser(demos, cfg)
    return DiffusionPlanner(
        shapes=shapes, schedule=schedule, params=params, ema_params=ema_params,
        normalizer=normalizer, horizon=demos.horizon, joint_count=demos.joint_count,
        dt=demos.dt, joint_limits=np.asarray(joint_limits, dtype=float),
        config=cfg, losses=losses)


def sample(planner: DiffusionPlanner, condition, seed) -> ActionPlan:
    """Ancestral denoising from pure noise using the EMA weights.

    Each step predicts the clean plan, clips it to the normalized data
    range, and draws from the fixed-small posterior; the clipping keeps
    unlucky chains from leaving the region the denoiser was trained on.
    Deterministic given the seed; the result is denormalized and clamped
    into the joint limits.
    """
    if planner.ema_params is None:
        raise NotTrainedError("planner has no trained weights")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cond = np.asarray(condition, dtype=float).reshape(1, -1)
    if cond.shape[1] != planner.shapes.cond_dim:
        raise ValueError(f"condition must have dim {planner.shapes.cond_dim}")

    sched = planner.schedule
    sigmas = sched.sigmas
    abar = sched.alpha_bars
    x = rng.standard_normal(planner.shapes.plan_dim)
    for t in range(sched.timesteps, 0, -1):
        eps = forward(planner.ema_params, x[None, :], t, cond, planner.shapes)[0]
        x0_hat = (x - np.sqrt(1.0 - abar[t]) * eps) / np.sqrt(abar[t])
        np.clip(x0_hat, -1.0, 1.0, out=x0_hat)
        c0 = np.sqrt(abar[t - 1]) * sched.betas[t] / (1.0 - abar[t])
        ct = np.sqrt(sched.alphas[t]) * (1.0 - abar[t - 1]) / (1.0 - abar[t])
        x = c0 * x0_hat + ct * x
        if t > 1:
            x = x + sigmas[t] * rng.standard_normal(planner.shapes.plan_dim)

    frames = planner.normalizer.denormalize(x.reshape(planner.horizon, planner.joint_count))
    frames = np.clip(frames, planner.joint_limits[:, 0], planner.joint_limits[:, 1])
    return ActionPlan(frames=frames, dt=planner.dt)
