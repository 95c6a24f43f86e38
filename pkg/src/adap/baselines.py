"""Interpolation-of-nearest-neighbors planners (plain and time-aligned)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion.augment import shift_frames
from .domain import ActionPlan, LabeledDemoSet
from .envs import ArmModel, tool_trajectory

NEIGHBOR_COUNT = 3
_SINGULAR_RCOND = 1e-9


def inn_weights(neighbor_results: np.ndarray, condition: np.ndarray) -> np.ndarray:
    """Affine weights w with sum(w)=1 and sum(w_i r_i) = condition.

    Falls back to inverse-distance weights when the neighbor results are
    affinely dependent (collinear).
    """
    m = neighbor_results.shape[0]
    system = np.vstack([neighbor_results.T, np.ones(m)])
    rhs = np.concatenate([condition, [1.0]])
    if np.linalg.matrix_rank(system, tol=_SINGULAR_RCOND) < m:
        d = np.linalg.norm(neighbor_results - condition, axis=1)
        inv = 1.0 / np.maximum(d, 1e-12)
        return inv / inv.sum()
    return np.linalg.solve(system, rhs)


def inn_plan(condition, demos: LabeledDemoSet) -> ActionPlan:
    """Frame-wise affine combination of the 3 nearest demos in result space."""
    c = np.asarray(condition, dtype=float).reshape(-1)
    if len(demos) < NEIGHBOR_COUNT:
        raise ValueError(f"need at least {NEIGHBOR_COUNT} demos, got {len(demos)}")
    order = np.argsort(np.linalg.norm(demos.results - c, axis=1), kind="stable")
    nearest = order[:NEIGHBOR_COUNT]
    w = inn_weights(demos.results[nearest], c)
    frames = np.tensordot(w, demos.frame_arrays()[nearest], axes=1)
    return ActionPlan(frames=frames, dt=demos.dt)


def peak_speed_frame(plan: ActionPlan, arm: ArmModel) -> int:
    _, vel = tool_trajectory(plan, arm)
    return int(np.argmax(np.linalg.norm(vel, axis=1)))


def align_dataset(demos: LabeledDemoSet, arm: ArmModel) -> LabeledDemoSet:
    """Shift every plan so its peak tool-speed frame hits the set median.

    Labels are kept: the shift pads with boundary frames only, which leaves
    the release state (and hence the rollout result) nearly unchanged.
    """
    peaks = [peak_speed_frame(p, arm) for p in demos.plans]
    target = int(np.median(peaks))
    shifted = [
        p.with_frames(shift_frames(p.frames, target - peak))
        for p, peak in zip(demos.plans, peaks)
    ]
    return LabeledDemoSet(plans=tuple(shifted), results=demos.results)


@dataclass
class InnPlanner:
    """Drop-in planner backed by nearest-neighbor interpolation.

    Output plans are clamped into the joint limits before execution, same
    as the diffusion sampler's contract.
    """

    demos: LabeledDemoSet
    joint_limits: np.ndarray
    aligned: bool = False

    def generate(self, condition, seed=None) -> ActionPlan:
        plan = inn_plan(condition, self.demos)
        limits = np.asarray(self.joint_limits, dtype=float)
        frames = np.clip(plan.frames, limits[:, 0], limits[:, 1])
        return ActionPlan(frames=frames, dt=plan.dt)
