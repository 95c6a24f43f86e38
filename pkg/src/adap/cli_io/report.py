"""Experiment outputs: results.csv, episodes.json, curves.svg, and the
replay verifier that re-runs stored episodes against the saved artifacts."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..adapter import ConditionAdapter, KernelConfig
from ..baselines import InnPlanner, align_dataset
from ..domain import LabeledDemoSet
from ..envs import make_env
from ..orchestrator import ExperimentReport, method_tail_cap, run_goal_episode
from .checkpoint import load_checkpoint
from .config import config_from_dict

_COLORS = {
    "adap": "#1f77b4",
    "adap_no_shift": "#ff7f0e",
    "adap_no_forget": "#2ca02c",
    "inn": "#d62728",
    "inn_aligned": "#9467bd",
}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_results_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "round", "success_rate", "mean_rounds_to_success"])
        for name, res in report.methods.items():
            rates = res.success_by_round
            for rnd in range(1, res.max_rounds + 1):
                rounds = [ep.success_round for ep in res.episodes
                          if ep.success_round is not None and ep.success_round <= rnd]
                mean = _fmt(np.mean(rounds)) if rounds else ""
                writer.writerow([name, rnd, _fmt(rates[rnd - 1]), mean])


def write_curves_svg(report: ExperimentReport, path) -> None:
    """Success-rate-vs-round chart, one polyline per method, no plot deps."""
    width, height = 640, 440
    left, right, top, bottom = 70, 20, 20, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    max_rounds = max(res.max_rounds for res in report.methods.values())

    def sx(rnd: float) -> float:
        return left + (rnd - 1) / max(max_rounds - 1, 1) * plot_w

    def sy(rate: float) -> float:
        return top + (1.0 - rate) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        'stroke="black"/>',
    ]
    for tick in np.linspace(0.0, 1.0, 6):
        y = sy(tick)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="12">{tick:.1f}</text>')
    for rnd in range(1, max_rounds + 1):
        x = sx(rnd)
        parts.append(f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" '
                     f'y2="{top + plot_h + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{top + plot_h + 18}" text-anchor="middle" '
                     f'font-size="12">{rnd}</text>')
    parts.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 12}" text-anchor="middle" '
                 'font-size="13">round</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2:.1f}" font-size="13" '
                 f'transform="rotate(-90 16 {top + plot_h / 2:.1f})" '
                 'text-anchor="middle">cumulative success rate</text>')

    for i, (name, res) in enumerate(report.methods.items()):
        color = _COLORS.get(name, "#333333")
        pts = " ".join(f"{sx(r + 1):.2f},{sy(rate):.2f}"
                       for r, rate in enumerate(res.success_by_round))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                     f'points="{pts}"/>')
        ly = top + 16 + 16 * i
        parts.append(f'<line x1="{left + 10}" y1="{ly - 4}" x2="{left + 34}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + 40}" y="{ly}" font-size="12">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def write_report(report: ExperimentReport, outdir, artifacts: dict | None = None) -> dict:
    """Emit results.csv, episodes.json and curves.svg; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": outdir / "results.csv",
        "episodes": outdir / "episodes.json",
        "curves": outdir / "curves.svg",
    }
    write_results_csv(report, paths["results"])
    payload = report.to_dict()
    payload["artifacts"] = artifacts or {}
    paths["episodes"].write_text(json.dumps(payload, indent=1))
    write_curves_svg(report, paths["curves"])
    return paths


class ReplayMismatchError(RuntimeError):
    pass


def _planner_for_replay(method: str, base: Path, artifacts: dict, demos, env):
    if method in ("adap", "adap_no_shift", "adap_no_forget"):
        ckpt = artifacts.get("checkpoints", {}).get(method)
        if ckpt is None:
            raise ReplayMismatchError(f"no checkpoint recorded for method {method}")
        return load_checkpoint(base / ckpt), demos
    if method == "inn":
        return InnPlanner(demos, env.arm.limits_array()), demos
    if method == "inn_aligned":
        aligned = align_dataset(demos, env.arm)
        return InnPlanner(aligned, env.arm.limits_array(), aligned=True), aligned
    raise ReplayMismatchError(f"unknown method {method}")


def replay_episodes(episodes_path, method: str | None = None,
                    goal_index: int | None = None):
    """Re-run stored episodes and check results reproduce bit-exactly.

    Returns a list of (method, goal_index, ok) triples.
    """
    episodes_path = Path(episodes_path)
    base = episodes_path.parent
    payload = json.loads(episodes_path.read_text())
    cfg = config_from_dict(payload["config"])
    artifacts = payload.get("artifacts", {})

    env = make_env(cfg.task, **cfg.env.env_kwargs())
    stage2_env = env
    if cfg.env.perturbation > 0.0:
        stage2_env = env.perturbed(cfg.env.perturbation,
                                   np.random.default_rng(cfg.env.perturbation_seed))
    demos_file = artifacts.get("demos")
    if demos_file is None:
        raise ReplayMismatchError("episodes file records no demo-set artifact")
    demos = LabeledDemoSet.load(base / demos_file)

    checks = []
    for name, res in payload["methods"].items():
        if method is not None and name != method:
            continue
        planner, method_demos = _planner_for_replay(name, base, artifacts, demos, env)
        for gi, stored in enumerate(res["episodes"]):
            if goal_index is not None and gi != goal_index:
                continue
            outcome = run_goal_episode(
                cfg, stage2_env, planner, method_demos,
                np.asarray(stored["goal"]), gi, method_tail_cap(name))
            ok = _episode_matches(stored, outcome)
            checks.append((name, gi, ok))
    return checks


def _episode_matches(stored: dict, outcome) -> bool:
    if stored["success_round"] != outcome.success_round:
        return False
    if len(stored["rounds"]) != len(outcome.rounds):
        return False
    for srec, rec in zip(stored["rounds"], outcome.rounds):
        if srec["plan_hash"] != rec.plan_hash:
            return False
        for key, value in (("result", rec.result), ("true_error", rec.true_error),
                           ("condition", rec.condition)):
            stored_v = srec[key]
            if (stored_v is None) != (value is None):
                return False
            if stored_v is not None and list(map(float, stored_v)) != [float(v) for v in value]:
                return False
    return True
