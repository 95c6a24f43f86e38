"""Condition adapter: Gaussian-process regression from observed goals back
to generation conditions, with a bounded stage-2 memory.

Each output dimension gets its own GP (RBF kernel, unit amplitude, length
scale tuned by marginal likelihood).  Targets are centered on the initial
segment's mean before fitting, so far-field queries fall back toward the
identity map learned in stage 1 rather than toward zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

JITTER_LIMIT = 1e-2


class SingularKernelError(RuntimeError):
    """Kernel matrix stayed non-positive-definite after jitter escalation."""


class UninitializedAdapterError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    amplitude: float = 1.0
    length_scale: float = 1.0
    length_scale_bounds: tuple = (0.05, 5.0)
    noise: float = 1e-6
    restarts: int = 5
    optimize: bool = True


def rbf_kernel(a: np.ndarray, b: np.ndarray, amplitude: float, length_scale: float) -> np.ndarray:
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return amplitude * np.exp(-0.5 * sq / length_scale**2)


@dataclass
class GprModel:
    """One fitted zero-mean GP: inputs X, scalar targets y."""

    x_train: np.ndarray
    y_train: np.ndarray
    config: KernelConfig
    length_scale: float
    noise: float
    chol: tuple
    alpha: np.ndarray
    log_marginal_likelihood: float


def _cholesky_with_jitter(k: np.ndarray, noise: float):
    """Factor K + noise*I, escalating noise tenfold up to the limit."""
    jitter = noise
    while jitter <= JITTER_LIMIT:
        try:
            return cho_factor(k + jitter * np.eye(k.shape[0]), lower=True), jitter
        except LinAlgError:
            jitter *= 10.0
    raise SingularKernelError(
        f"kernel matrix not positive definite even with jitter {JITTER_LIMIT}")


def _lml_and_grad(log_ls: float, x: np.ndarray, y: np.ndarray, cfg: KernelConfig):
    """Log marginal likelihood and its derivative w.r.t. log length scale."""
    ls = np.exp(log_ls)
    k = rbf_kernel(x, x, cfg.amplitude, ls)
    try:
        chol, _ = _cholesky_with_jitter(k, cfg.noise)
    except SingularKernelError:
        return -np.inf, 0.0
    alpha = cho_solve(chol, y)
    n = len(y)
    lml = (-0.5 * float(y @ alpha)
           - float(np.sum(np.log(np.diag(chol[0]))))
           - 0.5 * n * np.log(2.0 * np.pi))
    # dK/d(log ls) = K * sqdist / ls^2
    sq = np.sum(x**2, axis=1)[:, None] + np.sum(x**2, axis=1)[None, :] - 2.0 * x @ x.T
    dk = k * np.maximum(sq, 0.0) / ls**2
    k_inv = cho_solve(chol, np.eye(n))
    grad = 0.5 * float(np.trace((np.outer(alpha, alpha) - k_inv) @ dk))
    return lml, grad


def gpr_fit(x, y, config: KernelConfig = KernelConfig()) -> GprModel:
    """Fit one GP, picking the length scale by the best of several
    deterministic L-BFGS restarts on the log marginal likelihood."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise ValueError(f"inconsistent training shapes: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")

    lo, hi = config.length_scale_bounds
    if config.optimize and x.shape[0] > 1:
        starts = [np.log(config.length_scale)]
        extra = np.log(np.geomspace(lo, hi, max(config.restarts - 1, 1)))
        starts.extend(float(s) for s in extra[: config.restarts - 1])
        best_ls, best_lml = config.length_scale, -np.inf
        for s in starts:
            res = minimize(
                lambda th: tuple(-v for v in _lml_and_grad(th[0], x, y, config)),
                np.array([s]), jac=True, method="L-BFGS-B",
                bounds=[(np.log(lo), np.log(hi))])
            if -res.fun > best_lml:
                best_lml, best_ls = -res.fun, float(np.exp(res.x[0]))
        length_scale = best_ls
    else:
        length_scale = config.length_scale

    k = rbf_kernel(x, x, config.amplitude, length_scale)
    chol, jitter = _cholesky_with_jitter(k, config.noise)
    alpha = cho_solve(chol, y)
    lml = (-0.5 * float(y @ alpha)
           - float(np.sum(np.log(np.diag(chol[0]))))
           - 0.5 * len(y) * np.log(2.0 * np.pi))
    return GprModel(x_train=x, y_train=y, config=config, length_scale=length_scale,
                    noise=jitter, chol=chol, alpha=alpha, log_marginal_likelihood=lml)


def gpr_predict(model: GprModel, x_query):
    """Posterior mean and standard deviation at the query points."""
    xq = np.atleast_2d(np.asarray(x_query, dtype=float))
    k_star = rbf_kernel(xq, model.x_train, model.config.amplitude, model.length_scale)
    mean = k_star @ model.alpha
    v = cho_solve(model.chol, k_star.T)
    var = model.config.amplitude - np.einsum("ij,ji->i", k_star, v)
    np.maximum(var, 0.0, out=var)
    return mean, np.sqrt(var)


class ConditionAdapter:
    """Maps an observed goal to the next generation condition.

    Memory keeps the full initial segment (stage-1 identity pairs) forever;
    stage-2 trial pairs live in a tail capped at ``tail_cap`` (oldest out).
    Per-dimension GPs are refit after every change.
    """

    def __init__(self, initial_conditions, initial_goals,
                 kernel: KernelConfig = KernelConfig(),
                 condition_bounds=None, tail_cap: int | None = 2):
        conditions = np.atleast_2d(np.asarray(initial_conditions, dtype=float))
        goals = np.atleast_2d(np.asarray(initial_goals, dtype=float))
        if conditions.shape != goals.shape or conditions.shape[0] < 1:
            raise ValueError("initial conditions/goals must be matching nonempty n x k")
        self.kernel = kernel
        self.tail_cap = tail_cap
        self.condition_bounds = (None if condition_bounds is None
                                 else np.asarray(condition_bounds, dtype=float))
        self._initial = [(c.copy(), g.copy()) for c, g in zip(conditions, goals)]
        self._tail: list[tuple[np.ndarray, np.ndarray]] = []
        self._center = conditions.mean(axis=0)
        self._models: list[GprModel] | None = None
        self._refit()

    @classmethod
    def from_demos(cls, results, **kwargs) -> "ConditionAdapter":
        """Identity initialization: condition = goal = perceived result."""
        r = np.atleast_2d(np.asarray(results, dtype=float))
        return cls(initial_conditions=r, initial_goals=r, **kwargs)

    @property
    def initial_size(self) -> int:
        return len(self._initial)

    def pairs(self):
        """All (condition, goal) pairs, initial segment first."""
        return list(self._initial) + list(self._tail)

    def __len__(self) -> int:
        return len(self._initial) + len(self._tail)

    def _refit(self) -> None:
        pairs = self.pairs()
        goals = np.stack([g for _, g in pairs])
        conditions = np.stack([c for c, _ in pairs])
        self._models = [
            gpr_fit(goals, conditions[:, d] - self._center[d], self.kernel)
            for d in range(conditions.shape[1])
        ]

    def propose_condition(self, observed_goal) -> np.ndarray:
        if self._models is None:
            raise UninitializedAdapterError("adapter has no fitted models")
        g = np.asarray(observed_goal, dtype=float).reshape(1, -1)
        proposal = np.array([
            gpr_predict(m, g)[0][0] + self._center[d]
            for d, m in enumerate(self._models)
        ])
        if self.condition_bounds is not None:
            proposal = np.clip(proposal, self.condition_bounds[:, 0],
                               self.condition_bounds[:, 1])
        return proposal

    def posterior(self, observed_goal):
        """(mean, std) k-vectors of the per-dimension posteriors."""
        if self._models is None:
            raise UninitializedAdapterError("adapter has no fitted models")
        g = np.asarray(observed_goal, dtype=float).reshape(1, -1)
        mean = np.empty(len(self._models))
        std = np.empty(len(self._models))
        for d, m in enumerate(self._models):
            mu, sd = gpr_predict(m, g)
            mean[d], std[d] = mu[0] + self._center[d], sd[0]
        return mean, std

    def update(self, condition, observed_goal) -> None:
        """Append a stage-2 pair, evicting the oldest beyond the tail cap."""
        c = np.asarray(condition, dtype=float).reshape(-1)
        g = np.asarray(observed_goal, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(g))):
            raise ValueError("adapter update requires finite vectors")
        self._tail.append((c, g))
        if self.tail_cap is not None and len(self._tail) > self.tail_cap:
            self._tail.pop(0)
        self._refit()

    def to_json(self) -> str:
        return json.dumps({
            "initial": [[c.tolist(), g.tolist()] for c, g in self._initial],
            "tail": [[c.tolist(), g.tolist()] for c, g in self._tail],
            "tail_cap": self.tail_cap,
        })
