"""Rough, quantized estimation of table-plane error vectors.

Models eyeball feedback: each dimension is independently snapped to a
signed magnitude grid of 1 cm steps up to 4 cm and 5 cm steps beyond,
nearest value winning and exact ties resolved toward zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import as_table_vector

# Guards float noise when deciding which grid rung a magnitude sits on.
_EPS = 1e-9


@dataclass(frozen=True)
class PerceptionGrid:
    fine_step: float = 0.01
    fine_max: float = 0.04
    coarse_step: float = 0.05

    def __post_init__(self):
        if not (0 < self.fine_step <= self.fine_max < self.coarse_step):
            raise ValueError("grid steps must satisfy 0 < fine_step <= fine_max < coarse_step")

    def snap_magnitude(self, m: float) -> float:
        """Nearest allowed magnitude to m >= 0, ties toward zero.

        Rungs are computed as k*step products so re-snapping a snapped
        value reproduces the exact same float (idempotence).
        """
        if m <= 0.0:
            return 0.0
        if m < self.fine_max:
            k = math.floor(m / self.fine_step + _EPS)
            lower = k * self.fine_step
            upper = (k + 1) * self.fine_step
        elif m < self.coarse_step:
            lower, upper = self.fine_max, self.coarse_step
        else:
            n = math.floor(m / self.coarse_step + _EPS)
            lower = n * self.coarse_step
            upper = (n + 1) * self.coarse_step
        return lower if (m - lower) <= (upper - m) else upper

    def snap(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        out = np.empty_like(v)
        flat_in, flat_out = v.reshape(-1), out.reshape(-1)
        for i, a in enumerate(flat_in):
            flat_out[i] = math.copysign(self.snap_magnitude(abs(a)), a)
        # -0.0 is indistinguishable from 0.0 on the grid; normalize it away
        flat_out[flat_out == 0.0] = 0.0
        return out


class Perceptron:
    """The rough error estimator: optionally noisy, then grid-snapped.

    With ``noise > 0`` every dimension is scaled by a seeded uniform factor
    from [1 - noise, 1 + noise] before snapping (stress-test mode).
    """

    def __init__(self, grid: PerceptionGrid | None = None, noise: float = 0.0,
                 seed: int | None = None):
        self.grid = grid or PerceptionGrid()
        self.noise = float(noise)
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        self._rng = np.random.default_rng(seed)

    def perceive(self, error) -> np.ndarray:
        e = as_table_vector(error)
        if self.noise > 0.0:
            factors = self._rng.uniform(1.0 - self.noise, 1.0 + self.noise, size=e.shape)
            e = e * factors
        return self.grid.snap(e)

    def perceive_result(self, result, goal) -> np.ndarray:
        return self.perceive(as_table_vector(result) - as_table_vector(goal))

    def __call__(self, error) -> np.ndarray:
        return self.perceive(error)


class IdentityPerceptron:
    """Pass-through stand-in used by sanity harnesses."""

    def perceive(self, error) -> np.ndarray:
        return as_table_vector(error)

    def perceive_result(self, result, goal) -> np.ndarray:
        return as_table_vector(result) - as_table_vector(goal)

    def __call__(self, error) -> np.ndarray:
        return self.perceive(error)


_DEFAULT_GRID = PerceptionGrid()


def perceive(error) -> np.ndarray:
    """Snap an error vector onto the default grid (noise-free)."""
    return _DEFAULT_GRID.snap(as_table_vector(error))


def perceive_result(result, goal) -> np.ndarray:
    return perceive(as_table_vector(result) - as_table_vector(goal))
