"""Few-shot motion-pattern learning: a conditional diffusion action planner
refined goal-by-goal through rollout feedback and a GP condition adapter."""

from .adapter import ConditionAdapter, GprModel, KernelConfig, gpr_fit, gpr_predict
from .baselines import InnPlanner, align_dataset, inn_plan
from .diffusion import DiffusionPlanner, TrainConfig, make_schedule, sample, timeline_shift, train
from .domain import ActionPlan, LabeledDemoSet, PlanNormalizer, validate_plan
from .envs import (ArmModel, PendulumEnv, ProjectileEnv, SlidingEnv,
                   ballistic_landing, forward_kinematics, make_env, rollout,
                   sliding_stop)
from .orchestrator import (EpisodeOutcome, ExperimentReport, generate_priors,
                           run_experiment, run_stage1, run_stage2)
from .perception import PerceptionGrid, Perceptron, perceive, perceive_result

__version__ = "0.1.0"

__all__ = [
    "ActionPlan", "ArmModel", "ConditionAdapter", "DiffusionPlanner",
    "EpisodeOutcome", "ExperimentReport", "GprModel", "InnPlanner",
    "KernelConfig", "LabeledDemoSet", "PendulumEnv", "PerceptionGrid",
    "Perceptron", "PlanNormalizer", "ProjectileEnv", "SlidingEnv",
    "TrainConfig", "align_dataset", "ballistic_landing", "forward_kinematics",
    "generate_priors", "gpr_fit", "gpr_predict", "inn_plan", "make_env",
    "make_schedule", "perceive", "perceive_result", "rollout", "run_experiment",
    "run_stage1", "run_stage2", "sample", "sliding_stop", "timeline_shift",
    "train", "validate_plan",
]
