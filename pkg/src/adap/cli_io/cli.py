"""Command-line surface: prior generation, training, single-goal adaptation,
the full experiment study, and episode replay."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .. import orchestrator
from ..adapter import ConditionAdapter, KernelConfig
from ..diffusion import train as train_planner
from ..domain import LabeledDemoSet
from ..envs import make_env
from ..perception import PerceptionGrid, Perceptron
from .checkpoint import ConfigMismatchError, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, parse_config
from .interactive import EpisodeAbortedError, InteractivePerceptron
from .report import replay_episodes, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    out = os.environ.get("ADAP_OUT") or getattr(args, "out", None)
    return cfg.with_overrides(seed=getattr(args, "seed", None), output_dir=out)


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build_env(cfg: ExperimentConfig):
    return make_env(cfg.task, **cfg.env.env_kwargs())


def _perceptron(cfg: ExperimentConfig):
    grid = PerceptionGrid(fine_step=cfg.perception.fine_step,
                          fine_max=cfg.perception.fine_max,
                          coarse_step=cfg.perception.coarse_step)
    if cfg.perception.mode == "interactive":
        return InteractivePerceptron(grid=grid)
    return Perceptron(grid=grid, noise=cfg.perception.noise,
                      seed=cfg.perception.noise_seed)


def _demos(cfg: ExperimentConfig, env, outdir: Path) -> LabeledDemoSet:
    demos_path = outdir / "demos.json"
    if demos_path.exists():
        return LabeledDemoSet.load(demos_path)
    priors = orchestrator.generate_priors(
        env, cfg.priors.count, seed=cfg.seed, horizon=cfg.horizon, dt=cfg.dt,
        sigma=cfg.priors.sigma, min_separation=cfg.priors.min_separation,
        candidate_factor=cfg.priors.candidate_factor,
        offset_range=cfg.priors.offset_range)
    demos = orchestrator.build_demos(env, priors, Perceptron(
        grid=PerceptionGrid(fine_step=cfg.perception.fine_step,
                            fine_max=cfg.perception.fine_max,
                            coarse_step=cfg.perception.coarse_step),
        noise=cfg.perception.noise, seed=cfg.perception.noise_seed))
    demos.save(demos_path)
    return demos


def cmd_gen_priors(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(cfg)
    env = _build_env(cfg)
    demos = _demos(cfg, env, outdir)
    print(f"wrote {len(demos)} priors with perceived results to {outdir / 'demos.json'}")
    for i, r in enumerate(demos.results):
        print(f"  prior {i}: result ({r[0]:+.3f}, {r[1]:+.3f}) m")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(cfg)
    env = _build_env(cfg)
    demos = _demos(cfg, env, outdir)
    method = args.method or "adap"
    if method not in ("adap", "adap_no_shift", "adap_no_forget"):
        print(f"method {method!r} has no trainable planner", file=sys.stderr)
        return EXIT_CONFIG
    train_cfg = cfg.train.with_augment(method != "adap_no_shift")
    t0 = time.time()
    planner = train_planner(demos, train_cfg, env.arm.limits_array())
    path = outdir / f"planner_{method}.ckpt"
    save_checkpoint(planner, path)
    first = float(np.mean(planner.losses[:100]))
    last = float(np.mean(planner.losses[-100:]))
    print(f"trained {method} in {time.time() - t0:.1f}s "
          f"(loss {first:.4f} -> {last:.4f}); checkpoint: {path}")
    return EXIT_OK


def cmd_adapt(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(cfg)
    env = _build_env(cfg)
    demos = _demos(cfg, env, outdir)
    method = args.method or "adap"

    if method in ("inn", "inn_aligned"):
        planner, demos = orchestrator.build_planner(method, demos, cfg, env, {})
    else:
        ckpt = Path(args.checkpoint) if args.checkpoint else outdir / f"planner_{method}.ckpt"
        if not ckpt.exists():
            print(f"no checkpoint at {ckpt}; run `adap train` first", file=sys.stderr)
            return EXIT_RUNTIME
        expected = cfg.train.with_augment(method != "adap_no_shift")
        planner = load_checkpoint(ckpt, expected_config=expected, force=args.force)

    stage2_env = env
    if cfg.env.perturbation > 0.0:
        stage2_env = env.perturbed(cfg.env.perturbation,
                                   np.random.default_rng(cfg.env.perturbation_seed))
    adapter = ConditionAdapter.from_demos(
        demos.results, kernel=KernelConfig(),
        condition_bounds=cfg.condition_bounds,
        tail_cap=orchestrator.method_tail_cap(method))
    try:
        outcome = orchestrator.run_stage2(
            stage2_env, planner, adapter, np.array(args.goal), _perceptron(cfg),
            max_rounds=cfg.max_rounds, success_threshold=cfg.success_threshold,
            sample_seed=cfg.seed, stage1_trials=len(demos))
    except EpisodeAbortedError:
        print("episode aborted")
        return EXIT_RUNTIME

    for i, rec in enumerate(outcome.rounds, start=1):
        if rec.degenerate:
            print(f"round {i}: degenerate motion, no launch")
            continue
        r = rec.result
        tag = "HIT" if rec.success else f"miss by {np.linalg.norm(rec.true_error):.3f} m"
        print(f"round {i}: condition ({rec.condition[0]:+.3f}, {rec.condition[1]:+.3f})"
              f" -> landed ({r[0]:+.3f}, {r[1]:+.3f}); {tag}")
    episode_path = outdir / "episode.json"
    episode_path.write_text(json.dumps(outcome.to_dict(), indent=1))
    if outcome.success_round:
        print(f"goal reached in {outcome.success_round} stage-2 trials "
              f"({len(demos)} priors + {outcome.success_round} = "
              f"{len(demos) + outcome.success_round} total)")
        return EXIT_OK
    print(f"goal not reached within {cfg.max_rounds} rounds")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    outdir = _outdir(cfg)
    t0 = time.time()
    cache: dict = {}
    produced: dict = {}
    report = orchestrator.run_experiment(cfg, jobs=args.jobs, planner_cache=cache,
                                         artifacts_out=produced)

    artifacts: dict = {"demos": "demos.json", "checkpoints": {}}
    produced["demos"].save(outdir / "demos.json")
    for method in cfg.methods:
        if method in ("adap", "adap_no_forget", "adap_no_shift"):
            augment = method != "adap_no_shift"
            planner = cache.get(("ddpm", augment))
            if planner is not None:
                name = f"planner_{method}.ckpt"
                save_checkpoint(planner, outdir / name)
                artifacts["checkpoints"][method] = name

    paths = write_report(report, outdir, artifacts=artifacts)
    print(f"experiment finished in {time.time() - t0:.1f}s; outputs in {outdir}")
    for name, res in report.methods.items():
        rates = res.success_by_round
        mean = res.mean_rounds_to_success
        mean_txt = f", mean rounds to success {mean:.2f}" if mean else ""
        print(f"  {name}: round-3 rate {rates[min(2, len(rates) - 1)]:.2f}, "
              f"round-{res.max_rounds} rate {rates[-1]:.2f}{mean_txt}")
    print(f"  results: {paths['results']}")
    return EXIT_OK


def cmd_replay(args) -> int:
    checks = replay_episodes(args.episode, method=args.method,
                             goal_index=args.goal_index)
    bad = [c for c in checks if not c[2]]
    for method, gi, ok in checks:
        print(f"{'ok' if ok else 'MISMATCH'}  {method} goal {gi}")
    if bad:
        print(f"{len(bad)} of {len(checks)} episodes failed to reproduce", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"all {len(checks)} episodes reproduced bit-exactly")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adap",
        description="few-shot motion-pattern learning with iterative rollout adaptation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, jobs=False, method=False, checkpoint=False):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (ADAP_OUT overrides)")
        p.add_argument("--force", action="store_true",
                       help="proceed past checkpoint config mismatches")
        if jobs:
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel goal episodes")
        if method:
            p.add_argument("--method", choices=orchestrator.METHODS,
                           help="planner variant")
        if checkpoint:
            p.add_argument("--checkpoint", help="planner checkpoint path")

    common(sub.add_parser("gen-priors", help="generate and label prior plans"))
    common(sub.add_parser("train", help="train the diffusion planner"), method=True)
    adapt = sub.add_parser("adapt", help="adapt toward one goal")
    common(adapt, method=True, checkpoint=True)
    adapt.add_argument("--goal", nargs=2, type=float, required=True,
                       metavar=("X", "Y"), help="goal on the table plane (m)")
    common(sub.add_parser("experiment", help="run the multi-goal study"), jobs=True)
    replay = sub.add_parser("replay", help="verify stored episodes reproduce")
    replay.add_argument("--episode", required=True, help="episodes.json path")
    replay.add_argument("--method", help="restrict to one method")
    replay.add_argument("--goal-index", type=int, help="restrict to one goal")
    return parser


_COMMANDS = {
    "gen-priors": cmd_gen_priors,
    "train": cmd_train,
    "adapt": cmd_adapt,
    "experiment": cmd_experiment,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigMismatchError as exc:
        print(f"checkpoint mismatch: {exc} (use --force to load anyway)", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # surface runtime failures as exit code 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
