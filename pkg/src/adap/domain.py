"""Core value types shared by every other module.

An action plan is a dense H x J matrix of joint positions executed
open-loop at a fixed frame rate.  Results, errors, goals and generation
conditions are all k-dimensional table-plane vectors (k = 2, meters).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TABLE_DIM = 2
DEFAULT_DT = 0.02
RANGE_FLOOR = 1e-6


class PlanValidationError(ValueError):
    """Base class for action-plan invariant violations."""


class NonFiniteError(PlanValidationError):
    pass


class HorizonMismatchError(PlanValidationError):
    pass


class JointLimitError(PlanValidationError):
    pass


class DegenerateRangeError(ValueError):
    """A joint dimension has zero range and the range floor is disabled."""


class EmptyDatasetError(ValueError):
    pass


def as_table_vector(v) -> np.ndarray:
    """Coerce to a finite k=2 float vector (result/error/goal/condition)."""
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (TABLE_DIM,):
        raise ValueError(f"expected a {TABLE_DIM}-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite table vector: {arr}")
    return arr


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ActionPlan:
    """A complete open-loop motion: H frames of J joint positions (rad)."""

    frames: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"frames must be H x J, got shape {arr.shape}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "frames", _frozen(arr))

    @property
    def horizon(self) -> int:
        return self.frames.shape[0]

    @property
    def joint_count(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray) -> "ActionPlan":
        return ActionPlan(frames=frames, dt=self.dt)


def validate_plan(plan: ActionPlan, limits, horizon: int | None = None) -> None:
    """Raise unless the plan satisfies every invariant.

    ``limits`` is a J x 2 table of (lower, upper) joint bounds in radians.
    ``horizon`` optionally pins the configured H.
    """
    frames = plan.frames
    if horizon is not None and frames.shape[0] != horizon:
        raise HorizonMismatchError(
            f"plan has {frames.shape[0]} frames, configuration requires {horizon}"
        )
    bad = ~np.isfinite(frames)
    if bad.any():
        f, j = np.argwhere(bad)[0]
        raise NonFiniteError(f"non-finite joint value at frame {f}, joint {j}")
    lim = np.asarray(limits, dtype=float)
    if lim.shape != (frames.shape[1], 2):
        raise ValueError(
            f"limits must be J x 2 for J={frames.shape[1]}, got {lim.shape}"
        )
    low = frames < lim[:, 0]
    high = frames > lim[:, 1]
    if low.any() or high.any():
        f, j = np.argwhere(low | high)[0]
        raise JointLimitError(
            f"joint {j} out of limits at frame {f}: "
            f"{frames[f, j]:.4f} not in [{lim[j, 0]:.4f}, {lim[j, 1]:.4f}]"
        )


def plan_is_valid(plan: ActionPlan, limits, horizon: int | None = None) -> bool:
    try:
        validate_plan(plan, limits, horizon)
    except PlanValidationError:
        return False
    return True


@dataclass(frozen=True)
class PlanNormalizer:
    """Affine per-joint map of plan frames into [-1, 1] on the training set.

    A constant joint dimension gets its span floored at ``range_floor`` so it
    maps to 0 and denormalizes back to the constant exactly.
    """

    center: np.ndarray
    halfspan: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "halfspan", _frozen(self.halfspan))

    @classmethod
    def fit(cls, frame_arrays, range_floor: float | None = RANGE_FLOOR) -> "PlanNormalizer":
        stack = [np.asarray(a, dtype=float) for a in frame_arrays]
        if not stack:
            raise EmptyDatasetError("cannot fit a normalizer on an empty set")
        allframes = np.concatenate([a.reshape(-1, a.shape[-1]) for a in stack], axis=0)
        lo = allframes.min(axis=0)
        hi = allframes.max(axis=0)
        span = hi - lo
        if range_floor is None:
            if np.any(span == 0.0):
                j = int(np.flatnonzero(span == 0.0)[0])
                raise DegenerateRangeError(f"joint {j} is constant and the range floor is disabled")
        else:
            span = np.maximum(span, range_floor)
        return cls(center=(lo + hi) / 2.0, halfspan=span / 2.0)

    def normalize(self, frames: np.ndarray) -> np.ndarray:
        return (np.asarray(frames, dtype=float) - self.center) / self.halfspan

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        return np.asarray(normed, dtype=float) * self.halfspan + self.center

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "halfspan": self.halfspan.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PlanNormalizer":
        return cls(center=np.array(d["center"]), halfspan=np.array(d["halfspan"]))


def normalize_plan(plan: ActionPlan, normalizer: PlanNormalizer) -> ActionPlan:
    return plan.with_frames(normalizer.normalize(plan.frames))


def denormalize_plan(plan: ActionPlan, normalizer: PlanNormalizer) -> ActionPlan:
    return plan.with_frames(normalizer.denormalize(plan.frames))


@dataclass(frozen=True)
class LabeledDemoSet:
    """Ordered (plan, perceived result) pairs; seeds the planner and adapter."""

    plans: tuple[ActionPlan, ...]
    results: np.ndarray  # n x k, on the perception grid

    def __post_init__(self):
        res = np.asarray(self.results, dtype=float)
        if res.ndim != 2 or res.shape[1] != TABLE_DIM:
            raise ValueError(f"results must be n x {TABLE_DIM}, got {res.shape}")
        if len(self.plans) != res.shape[0]:
            raise ValueError("plan/result count mismatch")
        if self.plans:
            h, j, dt = self.plans[0].horizon, self.plans[0].joint_count, self.plans[0].dt
            for p in self.plans:
                if (p.horizon, p.joint_count, p.dt) != (h, j, dt):
                    raise ValueError("all plans must share (H, J, dt)")
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "results", _frozen(res))

    def __len__(self) -> int:
        return len(self.plans)

    @property
    def horizon(self) -> int:
        return self.plans[0].horizon

    @property
    def joint_count(self) -> int:
        return self.plans[0].joint_count

    @property
    def dt(self) -> float:
        return self.plans[0].dt

    def frame_arrays(self) -> np.ndarray:
        """All plans stacked as an n x H x J array."""
        return np.stack([p.frames for p in self.plans], axis=0)

    def to_json(self) -> str:
        return json.dumps(
            {
                "h": self.horizon,
                "j": self.joint_count,
                "dt": self.dt,
                "entries": [
                    {"plan": p.frames.tolist(), "result": r.tolist()}
                    for p, r in zip(self.plans, self.results)
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LabeledDemoSet":
        d = json.loads(text)
        plans = []
        results = []
        for entry in d["entries"]:
            frames = np.asarray(entry["plan"], dtype=float)
            if frames.shape != (d["h"], d["j"]):
                raise ValueError(
                    f"entry plan shape {frames.shape} does not match header ({d['h']}, {d['j']})"
                )
            plans.append(ActionPlan(frames=frames, dt=float(d["dt"])))
            results.append(as_table_vector(entry["result"]))
        if not plans:
            raise EmptyDatasetError("demo set file holds no entries")
        return cls(plans=tuple(plans), results=np.stack(results))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "LabeledDemoSet":
        return cls.from_json(Path(path).read_text())
