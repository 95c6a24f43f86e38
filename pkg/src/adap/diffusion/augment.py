"""Timeline shifting: translate a plan along its time axis, padding with
the nearest boundary frame so the horizon stays fixed."""

from __future__ import annotations

import numpy as np

from ..domain import ActionPlan


def _shift_index_map(horizon: int, steps: np.ndarray, rights: np.ndarray) -> np.ndarray:
    """Frame-index map realizing the shift: out[t] = in[clip(t -/+ s)]."""
    base = np.arange(horizon)[None, :]
    offsets = np.where(rights, steps, -steps)[:, None]
    return np.clip(base - offsets, 0, horizon - 1)


def shift_frames(frames: np.ndarray, steps: int) -> np.ndarray:
    """Deterministic shift of one H x J frame array.

    Positive ``steps`` delays the motion (start padded with frame 0),
    negative advances it (end padded with the last frame).
    """
    idx = _shift_index_map(frames.shape[0],
                           np.array([abs(steps)]),
                           np.array([steps >= 0]))[0]
    return frames[idx]


def timeline_shift(plan: ActionPlan, rng: np.random.Generator,
                   upperbound: int = 10) -> ActionPlan:
    """Randomly shift a plan by 1..upperbound frames, direction by fair coin."""
    if not 1 <= upperbound < plan.horizon:
        raise ValueError(f"upperbound must be in [1, {plan.horizon - 1}]")
    steps = int(rng.integers(1, upperbound + 1))
    right = bool(rng.integers(0, 2))
    return plan.with_frames(shift_frames(plan.frames, steps if right else -steps))


def shift_batch(batch: np.ndarray, rng: np.random.Generator,
                upperbound: int) -> np.ndarray:
    """Fresh independent timeline shift per sample of an n x H x J batch."""
    n, h, _ = batch.shape
    if not 1 <= upperbound < h:
        raise ValueError(f"upperbound must be in [1, {h - 1}]")
    steps = rng.integers(1, upperbound + 1, size=n)
    rights = rng.integers(0, 2, size=n).astype(bool)
    idx = _shift_index_map(h, steps, rights)
    return batch[np.arange(n)[:, None], idx, :]
