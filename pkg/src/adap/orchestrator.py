"""End-to-end pipeline: prior generation, motion-pattern learning, and the
iterative rollout-and-adapt loop, plus the multi-goal study protocol."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .adapter import ConditionAdapter, KernelConfig
from .baselines import InnPlanner, align_dataset
from .diffusion import TrainConfig, train as train_planner
from .domain import ActionPlan, LabeledDemoSet, as_table_vector, validate_plan
from .diffusion.augment import shift_frames
from .envs import DegenerateMotionError, make_env
from .perception import PerceptionGrid, Perceptron

METHODS = ("adap", "adap_no_shift", "adap_no_forget", "inn", "inn_aligned")

# Base throwing swing, tuned once so the unperturbed rollout releases the
# object forward-up (~42 deg at ~1.2 m/s) and lands near the middle of the
# goal area (~0.65 m ahead of the base).  Rows are B-spline control values
# per joint (yaw, shoulder, elbow, wrist) over the active window.
BASE_CONTROL_POINTS = np.array([
    [0.0000,  0.0000,  0.0000,  0.0000,  0.0000,  0.0000,  0.0000,  0.0000],
    [-0.4410, -0.4840, -0.4090,  0.3140,  0.6980,  1.4030,  0.8020,  0.8170],
    [-1.6150, -1.4900, -1.1980, -1.8020, -1.6040, -1.2850, -1.8600, -1.7580],
    [-0.7370, -0.7090, -0.7550, -0.6320, -1.4210, -1.0230,  0.4930,  0.2920],
])

CONTROL_POINT_COUNT = 8
_SPLINE_DEGREE = 3


class InsufficientDiversityError(RuntimeError):
    """Candidate pool could not produce enough well-spread priors."""


def spline_motion(control: np.ndarray, horizon: int, window: tuple,
                  dt: float) -> ActionPlan:
    """Sample clamped cubic B-spline joint trajectories into a plan.

    ``control`` is J x 8 control values per joint.  The motion occupies
    frames [window[0], window[1]]; outside it the boundary pose holds.
    """
    j, n_ctrl = control.shape
    lo, hi = window
    if not (0 <= lo < hi < horizon):
        raise ValueError(f"window {window} must fit inside the horizon {horizon}")
    interior = np.linspace(0.0, 1.0, n_ctrl - _SPLINE_DEGREE + 1)[1:-1]
    knots = np.concatenate([np.zeros(_SPLINE_DEGREE + 1), interior,
                            np.ones(_SPLINE_DEGREE + 1)])
    u = np.linspace(0.0, 1.0, hi - lo + 1)
    frames = np.empty((horizon, j))
    for jj in range(j):
        spline = BSpline(knots, control[jj], _SPLINE_DEGREE)
        vals = spline(u)
        frames[:lo, jj] = vals[0]
        frames[lo:hi + 1, jj] = vals
        frames[hi + 1:, jj] = vals[-1]
    return ActionPlan(frames=frames, dt=dt)


def default_window(horizon: int) -> tuple:
    return (round(horizon * 30 / 140), round(horizon * 110 / 140))


# Landing region a candidate prior must hit to count as a usable throw;
# roughly the reachable part of the table ahead of the base.
RESULT_REGION = ((0.25, 1.05), (-0.45, 0.45))

# Stability probe for candidate priors: jitter amplitude per joint value and
# the landing shift a stable motion may show under it.
_PROBE_JITTER = 2e-3
_PROBE_TOLERANCE = 0.025
_PROBE_COUNT = 4

# Control-point noise is smoothed along the spline axis: low-frequency
# perturbations move the landing without making the swing jerky.
_NOISE_KERNEL = np.array([0.25, 0.5, 0.25])


def _smooth_control_noise(rng: np.random.Generator, shape: tuple, sigma: float) -> np.ndarray:
    white = rng.normal(0.0, 1.0, size=shape)
    padded = np.pad(white, ((0, 0), (1, 1)), mode="edge")
    smooth = (padded[:, :-2] * _NOISE_KERNEL[0] + padded[:, 1:-1] * _NOISE_KERNEL[1]
              + padded[:, 2:] * _NOISE_KERNEL[2])
    return smooth * (sigma / np.sqrt(np.sum(_NOISE_KERNEL**2)))


def _is_stable_throw(env, plan: ActionPlan, result: np.ndarray, probe_seed: int) -> bool:
    """Reject jerky candidates whose landing jumps under tiny joint noise
    (release-frame ties); the motion pattern needs locally smooth rollouts."""
    rng = np.random.default_rng(probe_seed)
    for _ in range(_PROBE_COUNT):
        jitter = rng.uniform(-_PROBE_JITTER, _PROBE_JITTER, plan.frames.shape)
        try:
            moved = env.rollout(plan.with_frames(plan.frames + jitter))
        except (DegenerateMotionError, ValueError):
            return False
        if np.linalg.norm(moved - result) > _PROBE_TOLERANCE:
            return False
    return True


def generate_priors(env, n: int, seed: int, horizon: int = 140,
                    dt: float = 0.02, sigma: float = 0.15,
                    min_separation: float = 0.08, candidate_factor: int = 5,
                    offset_range: int = 10,
                    base_control: np.ndarray | None = None,
                    result_region: tuple = RESULT_REGION) -> list:
    """Seeded prior plans: base swing + control-point noise + time offsets.

    Candidates are rolled out and greedily filtered: kept results must land
    inside the reachable table region, pairwise at least ``min_separation``
    apart, with no degenerate launches.  Each candidate also gets a random
    timeline offset, mirroring demo sources whose motions start at
    different timesteps.
    """
    if n < 2:
        raise ValueError("need at least 2 priors")
    rng = np.random.default_rng(seed)
    base = BASE_CONTROL_POINTS if base_control is None else np.asarray(base_control)
    limits = env.arm.limits_array()
    window = default_window(horizon)
    (x_lo, x_hi), (y_lo, y_hi) = result_region

    selected, selected_results = [], []
    for candidate_index in range(candidate_factor * n):
        if len(selected) == n:
            break
        control = base + _smooth_control_noise(rng, base.shape, sigma)
        offset = int(rng.integers(-offset_range, offset_range + 1))
        plan = spline_motion(control, horizon, window, dt)
        frames = np.clip(shift_frames(plan.frames, offset),
                         limits[:, 0], limits[:, 1])
        plan = ActionPlan(frames=frames, dt=dt)
        try:
            validate_plan(plan, limits, horizon)
            result = env.rollout(plan)
        except (DegenerateMotionError, ValueError):
            continue
        if not (x_lo <= result[0] <= x_hi and y_lo <= result[1] <= y_hi):
            continue
        if not _is_stable_throw(env, plan, result, probe_seed=seed * 100003 + candidate_index):
            continue
        if selected_results and np.min(
                np.linalg.norm(np.array(selected_results) - result, axis=1)) < min_separation:
            continue
        selected.append(plan)
        selected_results.append(result)

    if len(selected) < n:
        raise InsufficientDiversityError(
            f"only {len(selected)} of {n} priors found after "
            f"{candidate_factor * n} candidates")
    return selected


def build_demos(env, priors, perceptron) -> LabeledDemoSet:
    """Roll out every prior and label it with the perceived result (goal 0)."""
    origin = np.zeros(2)
    results = [perceptron.perceive_result(env.rollout(p), origin) for p in priors]
    return LabeledDemoSet(plans=tuple(priors), results=np.stack(results))


def run_stage1(env, priors, perceptron, train_cfg: TrainConfig):
    """Motion pattern learning: label the priors, train the planner."""
    demos = build_demos(env, priors, perceptron)
    planner = train_planner(demos, train_cfg, env.arm.limits_array())
    return demos, planner


@dataclass
class RoundRecord:
    condition: np.ndarray
    plan_hash: str
    result: np.ndarray | None
    true_error: np.ndarray | None
    perceived_error: np.ndarray | None
    degenerate: bool = False
    success: bool = False

    def to_dict(self) -> dict:
        opt = lambda v: None if v is None else list(v)
        return {"condition": list(self.condition), "plan_hash": self.plan_hash,
                "result": opt(self.result), "true_error": opt(self.true_error),
                "perceived_error": opt(self.perceived_error),
                "degenerate": self.degenerate, "success": self.success}


@dataclass
class EpisodeOutcome:
    goal: np.ndarray
    goal_estimate: np.ndarray
    rounds: list
    success_round: int | None  # 1-based round of first success
    stage1_trials: int

    @property
    def stage2_rounds(self) -> int:
        return len(self.rounds)

    def to_dict(self) -> dict:
        return {"goal": list(self.goal), "goal_estimate": list(self.goal_estimate),
                "rounds": [r.to_dict() for r in self.rounds],
                "success_round": self.success_round,
                "stage1_trials": self.stage1_trials}


def plan_hash(plan: ActionPlan) -> str:
    digest = hashlib.sha256()
    digest.update(np.float64(plan.dt).tobytes())
    digest.update(np.ascontiguousarray(plan.frames).tobytes())
    return digest.hexdigest()


def run_stage2(env, planner, adapter: ConditionAdapter, goal, perceptron,
               max_rounds: int = 10, success_threshold: float = 0.03,
               sample_seed: int = 0, stage1_trials: int = 0) -> EpisodeOutcome:
    """Iterative rollout and adaptation toward one goal.

    Each round: propose condition, generate plan (round r samples with
    ``sample_seed ^ r``), roll out, check the true distance, otherwise feed
    the perceived error back into the adapter.
    """
    g = as_table_vector(goal)
    g_est = perceptron.perceive_result(g, np.zeros(2))
    rounds: list[RoundRecord] = []
    success_round = None

    for r in range(max_rounds):
        condition = adapter.propose_condition(g_est)
        plan = planner.generate(condition, sample_seed ^ r)
        try:
            result = env.rollout(plan)
        except DegenerateMotionError:
            rounds.append(RoundRecord(condition=condition, plan_hash=plan_hash(plan),
                                      result=None, true_error=None,
                                      perceived_error=None, degenerate=True))
            continue
        error = result - g
        if float(np.linalg.norm(error)) < success_threshold:
            rounds.append(RoundRecord(condition=condition, plan_hash=plan_hash(plan),
                                      result=result, true_error=error,
                                      perceived_error=None, success=True))
            success_round = r + 1
            break
        perceived = perceptron.perceive(error)
        rounds.append(RoundRecord(condition=condition, plan_hash=plan_hash(plan),
                                  result=result, true_error=error,
                                  perceived_error=perceived))
        adapter.update(condition, g_est + perceived)

    return EpisodeOutcome(goal=g, goal_estimate=g_est, rounds=rounds,
                          success_round=success_round, stage1_trials=stage1_trials)


def goal_grid(center, size, counts) -> np.ndarray:
    """Evenly spread goals over a rectangle (row-major, endpoints included)."""
    cx, cy = center
    sx, sy = size
    nx, ny = counts
    xs = np.linspace(cx - sx / 2.0, cx + sx / 2.0, nx)
    ys = np.linspace(cy - sy / 2.0, cy + sy / 2.0, ny)
    return np.array([(x, y) for x in xs for y in ys])


@dataclass
class MethodResult:
    method: str
    episodes: list
    max_rounds: int

    @property
    def success_by_round(self) -> np.ndarray:
        """Cumulative success rate per round (1..max_rounds)."""
        counts = np.zeros(self.max_rounds)
        for ep in self.episodes:
            if ep.success_round is not None:
                counts[ep.success_round - 1:] += 1
        return counts / max(len(self.episodes), 1)

    @property
    def mean_rounds_to_success(self) -> float | None:
        rounds = [ep.success_round for ep in self.episodes if ep.success_round]
        return float(np.mean(rounds)) if rounds else None

    def total_trials(self, prior_count: int) -> float | None:
        """Stage-1 rollouts plus mean stage-2 rounds to first success."""
        mean = self.mean_rounds_to_success
        return None if mean is None else prior_count + mean


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    prior_count: int
    goals: np.ndarray
    methods: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "prior_count": self.prior_count,
            "goals": self.goals.tolist(),
            "methods": {
                name: {
                    "success_by_round": list(res.success_by_round),
                    "mean_rounds_to_success": res.mean_rounds_to_success,
                    "total_trials": res.total_trials(self.prior_count),
                    "episodes": [ep.to_dict() for ep in res.episodes],
                }
                for name, res in self.methods.items()
            },
        }


def _make_perceptron(cfg) -> Perceptron:
    grid = PerceptionGrid(fine_step=cfg.perception.fine_step,
                          fine_max=cfg.perception.fine_max,
                          coarse_step=cfg.perception.coarse_step)
    return Perceptron(grid=grid, noise=cfg.perception.noise,
                      seed=cfg.perception.noise_seed)


def method_tail_cap(method: str) -> int | None:
    """Stage-2 memory cap: 2 everywhere except the no-forgetting ablation."""
    return None if method == "adap_no_forget" else 2


def build_planner(method: str, demos: LabeledDemoSet, cfg, env, cache: dict):
    """Planner per method; diffusion trainings are cached by augment flag."""
    if method in ("adap", "adap_no_forget", "adap_no_shift"):
        augment = method != "adap_no_shift"
        key = ("ddpm", augment)
        if key not in cache:
            train_cfg = cfg.train.with_augment(augment)
            cache[key] = train_planner(demos, train_cfg, env.arm.limits_array())
        return cache[key], demos
    if method == "inn":
        return InnPlanner(demos, env.arm.limits_array()), demos
    if method == "inn_aligned":
        aligned = align_dataset(demos, env.arm)
        return InnPlanner(aligned, env.arm.limits_array(), aligned=True), aligned
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_goal_episode(cfg, stage2_env, planner, method_demos: LabeledDemoSet,
                     goal, goal_index: int, tail_cap: int | None) -> EpisodeOutcome:
    """One goal's stage-2 episode, fully determined by config + goal index.

    Replay re-invokes this with the same arguments to reproduce episodes.
    """
    adapter = ConditionAdapter.from_demos(
        method_demos.results, kernel=KernelConfig(),
        condition_bounds=cfg.condition_bounds, tail_cap=tail_cap)
    perceptron = _make_perceptron(cfg)
    if cfg.perception.noise > 0.0:
        perceptron = Perceptron(grid=perceptron.grid, noise=cfg.perception.noise,
                                seed=cfg.perception.noise_seed + goal_index)
    seed = cfg.seed
    if cfg.sampler_seed_mode == "per_goal":
        seed = cfg.seed ^ (1000003 * (goal_index + 1))
    return run_stage2(stage2_env, planner, adapter, goal, perceptron,
                      max_rounds=cfg.max_rounds,
                      success_threshold=cfg.success_threshold,
                      sample_seed=seed, stage1_trials=cfg.priors.count)


def run_experiment(cfg, jobs: int = 1, planner_cache: dict | None = None,
                   artifacts_out: dict | None = None) -> ExperimentReport:
    """The full multi-goal study: shared stage 1, per-goal stage 2."""
    env = make_env(cfg.task, **cfg.env.env_kwargs())
    perceptron = _make_perceptron(cfg)
    priors = generate_priors(
        env, cfg.priors.count, seed=cfg.seed, horizon=cfg.horizon, dt=cfg.dt,
        sigma=cfg.priors.sigma, min_separation=cfg.priors.min_separation,
        candidate_factor=cfg.priors.candidate_factor,
        offset_range=cfg.priors.offset_range)
    demos = build_demos(env, priors, perceptron)
    goals = goal_grid(cfg.goals.center, cfg.goals.size, cfg.goals.counts)
    if artifacts_out is not None:
        artifacts_out["demos"] = demos
        artifacts_out["priors"] = priors

    stage2_env = env
    if cfg.env.perturbation > 0.0:
        stage2_env = env.perturbed(cfg.env.perturbation,
                                   np.random.default_rng(cfg.env.perturbation_seed))

    cache = planner_cache if planner_cache is not None else {}
    methods: dict[str, MethodResult] = {}
    for method in cfg.methods:
        planner, method_demos = build_planner(method, demos, cfg, env, cache)
        tail_cap = method_tail_cap(method)

        def episode(goal_index: int) -> EpisodeOutcome:
            return run_goal_episode(cfg, stage2_env, planner, method_demos,
                                    goals[goal_index], goal_index, tail_cap)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                episodes = list(pool.map(episode, range(len(goals))))
        else:
            episodes = [episode(i) for i in range(len(goals))]
        methods[method] = MethodResult(method=method, episodes=episodes,
                                       max_rounds=cfg.max_rounds)

    return ExperimentReport(config=cfg.to_dict(), seed=cfg.seed,
                            prior_count=len(priors), goals=goals, methods=methods)
