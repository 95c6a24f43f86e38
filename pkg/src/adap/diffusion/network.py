"""Fixed feed-forward epsilon predictor with hand-derived gradients.

Input is the flattened normalized plan, concatenated with a sinusoidal
timestep embedding and a learned linear embedding of the generation
condition.  Two tanh hidden layers of fixed width follow; the output is
the epsilon prediction for every plan entry.  Concatenating the
embeddings into the input makes the conditioning additive in the first
hidden layer's pre-activation.

Gradients are written out explicitly (no autodiff); tests verify every
one of them against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_ORDER = ("cond_w", "w1", "b1", "w2", "b2", "w3", "b3")


class NotTrainedError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetShapes:
    plan_dim: int
    cond_dim: int
    hidden: int = 512
    embed_dim: int = 32

    @property
    def input_dim(self) -> int:
        return self.plan_dim + 2 * self.embed_dim

    def to_dict(self) -> dict:
        return {"plan_dim": self.plan_dim, "cond_dim": self.cond_dim,
                "hidden": self.hidden, "embed_dim": self.embed_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "NetShapes":
        return cls(**d)


def init_params(shapes: NetShapes, rng: np.random.Generator) -> dict:
    """Gaussian init scaled by 1/sqrt(fan_in); zero biases."""
    def dense(out_dim, in_dim):
        return rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim)

    return {
        "cond_w": dense(shapes.embed_dim, shapes.cond_dim),
        "w1": dense(shapes.hidden, shapes.input_dim),
        "b1": np.zeros(shapes.hidden),
        "w2": dense(shapes.hidden, shapes.hidden),
        "b2": np.zeros(shapes.hidden),
        "w3": dense(shapes.plan_dim, shapes.hidden),
        "b3": np.zeros(shapes.plan_dim),
    }


def timestep_embedding(t, embed_dim: int) -> np.ndarray:
    """Sinusoidal embedding of (integer) diffusion timesteps."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = embed_dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / (half - 1))
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def forward(params: dict, x: np.ndarray, t, cond: np.ndarray,
            shapes: NetShapes, cache: bool = False):
    """Epsilon prediction for a batch (x: B x plan_dim, cond: B x cond_dim)."""
    t_emb = timestep_embedding(t, shapes.embed_dim)
    if t_emb.shape[0] == 1 and x.shape[0] > 1:
        t_emb = np.broadcast_to(t_emb, (x.shape[0], shapes.embed_dim))
    c_emb = cond @ params["cond_w"].T
    z = np.concatenate([x, t_emb, c_emb], axis=1)
    h1 = np.tanh(z @ params["w1"].T + params["b1"])
    h2 = np.tanh(h1 @ params["w2"].T + params["b2"])
    out = h2 @ params["w3"].T + params["b3"]
    if cache:
        return out, (z, h1, h2)
    return out


def loss_and_grads(params: dict, x_t: np.ndarray, t, cond: np.ndarray,
                   target: np.ndarray, shapes: NetShapes):
    """Mean squared epsilon-prediction error and its parameter gradients."""
    out, (z, h1, h2) = forward(params, x_t, t, cond, shapes, cache=True)
    diff = out - target
    loss = float(np.mean(diff**2))

    d_out = (2.0 / diff.size) * diff
    g_w3 = d_out.T @ h2
    g_b3 = d_out.sum(axis=0)
    d_h2 = d_out @ params["w3"]
    d_a2 = d_h2 * (1.0 - h2**2)
    g_w2 = d_a2.T @ h1
    g_b2 = d_a2.sum(axis=0)
    d_h1 = d_a2 @ params["w2"]
    d_a1 = d_h1 * (1.0 - h1**2)
    g_w1 = d_a1.T @ z
    g_b1 = d_a1.sum(axis=0)
    d_z = d_a1 @ params["w1"]
    d_cemb = d_z[:, shapes.plan_dim + shapes.embed_dim:]
    g_cond_w = d_cemb.T @ cond

    grads = {"cond_w": g_cond_w, "w1": g_w1, "b1": g_b1,
             "w2": g_w2, "b2": g_b2, "w3": g_w3, "b3": g_b3}
    return loss, grads


def flatten_params(params: dict) -> np.ndarray:
    return np.concatenate([params[name].ravel() for name in PARAM_ORDER])


def unflatten_params(flat: np.ndarray, shapes: NetShapes) -> dict:
    template = init_params(shapes, np.random.default_rng(0))
    out = {}
    pos = 0
    for name in PARAM_ORDER:
        size = template[name].size
        out[name] = flat[pos:pos + size].reshape(template[name].shape).copy()
        pos += size
    if pos != flat.size:
        raise ValueError(f"parameter payload has {flat.size} values, expected {pos}")
    return out
