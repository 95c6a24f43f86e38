"""Training loop for the conditional denoiser: AdamW with warmup plus an
exponential-moving-average weight copy for sampling."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..domain import LabeledDemoSet, PlanNormalizer, EmptyDatasetError
from .augment import shift_batch
from .network import NetShapes, init_params, loss_and_grads
from .schedule import make_schedule, q_sample


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    epochs: int = 3000
    learning_rate: float = 5e-4
    betas: tuple = (0.95, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-6
    warmup_steps: int = 500
    ema_power: float = 0.75
    ema_inv_gamma: float = 1.0
    ema_max: float = 0.9999
    ema_update_after: int = 0
    shift_upperbound: int = 10
    augment: bool = True  # the no-shift ablation turns this off
    timesteps: int = 100
    schedule: str = "squaredcos_cap_v2"
    hidden_width: int = 512
    embed_dim: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "epochs", "learning_rate", "warmup_steps",
                     "timesteps", "hidden_width", "embed_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.shift_upperbound < 1:
            raise ValueError("shift_upperbound must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)

    def with_augment(self, augment: bool) -> "TrainConfig":
        return replace(self, augment=augment)


class AdamW:
    """Decoupled-weight-decay adaptive-moment optimizer over a param dict."""

    def __init__(self, params: dict, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    def step(self, params: dict, grads: dict, lr: float) -> None:
        self.step_count += 1
        b1, b2 = self.cfg.betas
        bc1 = 1.0 - b1**self.step_count
        bc2 = 1.0 - b2**self.step_count
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g**2
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] -= lr * (m_hat / (np.sqrt(v_hat) + self.cfg.eps)
                               + self.cfg.weight_decay * params[k])


def ema_decay(step: int, power: float, inv_gamma: float,
              max_value: float, update_after: int) -> float:
    """Inverse-gamma/power decay ramp: 1 - (1 + s/gamma)^-power, capped."""
    s = step - update_after
    if s <= 0:
        return 0.0
    value = 1.0 - (1.0 + s / inv_gamma) ** (-power)
    return min(max(value, 0.0), max_value)


class EmaTracker:
    def __init__(self, params: dict, cfg: TrainConfig):
        self.cfg = cfg
        self.shadow = {k: v.copy() for k, v in params.items()}
        self.step = 0

    def update(self, params: dict) -> None:
        d = ema_decay(self.step, self.cfg.ema_power, self.cfg.ema_inv_gamma,
                      self.cfg.ema_max, self.cfg.ema_update_after)
        for k, v in params.items():
            self.shadow[k] = d * self.shadow[k] + (1.0 - d) * v
        self.step += 1


def warmup_lr(step: int, cfg: TrainConfig) -> float:
    return cfg.learning_rate * min(1.0, (step + 1) / cfg.warmup_steps)


def train_denoiser(demos: LabeledDemoSet, cfg: TrainConfig):
    """Fit the epsilon predictor on a labeled demo set.

    Returns (shapes, trained params, EMA params, normalizer, schedule,
    per-epoch loss curve).  Fully deterministic given cfg.seed.
    """
    if len(demos) < 2:
        raise EmptyDatasetError("training needs at least 2 demonstrations")
    rng = np.random.default_rng(cfg.seed)
    normalizer = PlanNormalizer.fit([p.frames for p in demos.plans])
    plans = np.stack([normalizer.normalize(p.frames) for p in demos.plans])
    conditions = np.asarray(demos.results, dtype=float)
    n, h, j = plans.shape
    if cfg.augment and cfg.shift_upperbound >= h:
        raise ValueError("shift_upperbound must be below the horizon")

    shapes = NetShapes(plan_dim=h * j, cond_dim=conditions.shape[1],
                       hidden=cfg.hidden_width, embed_dim=cfg.embed_dim)
    schedule = make_schedule(cfg.timesteps, cfg.schedule)
    params = init_params(shapes, rng)
    optimizer = AdamW(params, cfg)
    ema = EmaTracker(params, cfg)
    losses = np.empty(cfg.epochs)

    for epoch in range(cfg.epochs):
        idx = rng.integers(0, n, size=cfg.batch_size)
        batch = plans[idx]
        if cfg.augment:
            batch = shift_batch(batch, rng, cfg.shift_upperbound)
        x0 = batch.reshape(cfg.batch_size, -1)
        cond = conditions[idx]
        t = rng.integers(1, cfg.timesteps + 1, size=cfg.batch_size)
        noise = rng.standard_normal(x0.shape)
        x_t = q_sample(x0, t, noise, schedule)

        loss, grads = loss_and_grads(params, x_t, t, cond, noise, shapes)
        optimizer.step(params, grads, warmup_lr(epoch, cfg))
        ema.update(params)
        losses[epoch] = loss

    return shapes, params, ema.shadow, normalizer, schedule, losses
