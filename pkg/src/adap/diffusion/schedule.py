"""Forward-process noise schedule for the denoising planner."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BETA_CLIP = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step beta/alpha tables, indexed 1..T (index 0 holds abar=1)."""

    timesteps: int
    kind: str
    betas: np.ndarray       # length T+1, betas[0] unused (0.0)
    alphas: np.ndarray      # 1 - betas
    alpha_bars: np.ndarray  # cumulative products, alpha_bars[0] = 1.0

    @property
    def sigmas(self) -> np.ndarray:
        """Fixed-small posterior std per step (sigma_1 = 0)."""
        var = self.betas[1:] * (1.0 - self.alpha_bars[:-1]) / (1.0 - self.alpha_bars[1:])
        return np.concatenate([[0.0], np.sqrt(var)])

    def to_dict(self) -> dict:
        return {"timesteps": self.timesteps, "kind": self.kind}


def make_schedule(timesteps: int = 100, kind: str = "squaredcos_cap_v2",
                  beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Build the schedule; squared-cosine by default, linear as an option."""
    if timesteps < 1:
        raise ValueError("timesteps must be >= 1")
    t = np.arange(timesteps + 1, dtype=float)
    if kind == "squaredcos_cap_v2":
        f = np.cos(((t / timesteps + 0.008) / 1.008) * np.pi / 2.0) ** 2
        abar_raw = f / f[0]
        betas_core = 1.0 - abar_raw[1:] / abar_raw[:-1]
        betas_core = np.minimum(betas_core, BETA_CLIP)
    elif kind == "linear":
        betas_core = np.linspace(beta_start, beta_end, timesteps)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    betas = np.concatenate([[0.0], betas_core])
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    return NoiseSchedule(timesteps=timesteps, kind=kind, betas=betas,
                         alphas=alphas, alpha_bars=alpha_bars)


def q_sample(x0: np.ndarray, t, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Noised sample x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    t = np.asarray(t)
    abar = schedule.alpha_bars[t]
    shape = abar.shape + (1,) * (x0.ndim - abar.ndim)
    abar = abar.reshape(shape)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * noise
