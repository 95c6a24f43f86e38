"""Planner checkpoint file: magic bytes, JSON header, raw float64 payload.

Layout: ``ADAP1`` | 8-byte little-endian header length | UTF-8 JSON header
| train weights | EMA weights (both little-endian float64, in the fixed
parameter order declared by the header).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from pathlib import Path

import numpy as np

from ..diffusion.network import PARAM_ORDER, NetShapes, flatten_params, unflatten_params
from ..diffusion.planner import DiffusionPlanner
from ..diffusion.schedule import make_schedule
from ..diffusion.training import TrainConfig
from ..domain import PlanNormalizer

MAGIC = b"ADAP1"


class CorruptCheckpointError(RuntimeError):
    pass


class ConfigMismatchError(RuntimeError):
    pass


def config_hash(cfg: TrainConfig) -> str:
    return hashlib.sha256(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def save_checkpoint(planner: DiffusionPlanner, path) -> None:
    header = {
        "shapes": planner.shapes.to_dict(),
        "schedule": planner.schedule.to_dict(),
        "normalizer": planner.normalizer.to_dict(),
        "horizon": planner.horizon,
        "joint_count": planner.joint_count,
        "dt": planner.dt,
        "joint_limits": planner.joint_limits.tolist(),
        "train_config": planner.config.to_dict(),
        "config_hash": config_hash(planner.config),
        "param_order": list(PARAM_ORDER),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    payload = np.concatenate([
        flatten_params(planner.params),
        flatten_params(planner.ema_params),
    ]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        fh.write(payload.tobytes())


def load_checkpoint(path, expected_config: TrainConfig | None = None,
                    force: bool = False) -> DiffusionPlanner:
    """Rebuild a planner; verifies the stored config hash when one is given."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{path}: missing {MAGIC!r} magic bytes")
    header_len = int.from_bytes(blob[len(MAGIC): len(MAGIC) + 8], "little")
    header_end = len(MAGIC) + 8 + header_len
    if len(blob) < header_end:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[len(MAGIC) + 8: header_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header: {exc}") from exc

    try:
        shapes = NetShapes.from_dict(header["shapes"])
        cfg = TrainConfig.from_dict(header["train_config"])
        normalizer = PlanNormalizer.from_dict(header["normalizer"])
        schedule = make_schedule(**header["schedule"])
        stored_hash = header["config_hash"]
        joint_limits = np.asarray(header["joint_limits"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"{path}: malformed header: {exc}") from exc

    if expected_config is not None and config_hash(expected_config) != stored_hash:
        message = (f"{path}: checkpoint was trained under a different "
                   f"configuration (hash {stored_hash[:12]}...)")
        if not force:
            raise ConfigMismatchError(message)
        warnings.warn(message + "; loading anyway (--force)")

    try:
        payload = np.frombuffer(blob[header_end:], dtype="<f8")
        half = payload.size // 2
        params = unflatten_params(payload[:half].astype(float), shapes)
        ema_params = unflatten_params(payload[half:].astype(float), shapes)
    except ValueError as exc:
        raise CorruptCheckpointError(f"{path}: truncated payload: {exc}") from exc

    return DiffusionPlanner(
        shapes=shapes, schedule=schedule, params=params, ema_params=ema_params,
        normalizer=normalizer, horizon=header["horizon"],
        joint_count=header["joint_count"], dt=header["dt"],
        joint_limits=joint_limits, config=cfg)
