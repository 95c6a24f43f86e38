import numpy as np
import pytest

from adap.baselines import InnPlanner, align_dataset, inn_plan, inn_weights, peak_speed_frame
from adap.diffusion.augment import shift_frames
from adap.domain import ActionPlan, LabeledDemoSet
from adap.envs import ArmModel, ProjectileEnv
from adap.orchestrator import BASE_CONTROL_POINTS, default_window, generate_priors, spline_motion

ARM = ArmModel()


def demo_set():
    rng = np.random.default_rng(0)
    plans = tuple(ActionPlan(frames=rng.uniform(-0.5, 0.5, (30, 4)), dt=0.02)
                  for _ in range(5))
    results = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                        [0.6, 0.6], [-0.5, 0.2]])
    return LabeledDemoSet(plans=plans, results=results)


class TestInnWeights:
    def test_hand_solved_example(self):
        r = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        w = inn_weights(r, np.array([0.25, 0.25]))
        assert w == pytest.approx([0.5, 0.25, 0.25], abs=1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = rng.uniform(-1, 1, (3, 2))
            c = rng.uniform(-1, 1, 2)
            w = inn_weights(r, c)
            assert w.sum() == pytest.approx(1.0, abs=1e-9)

    def test_collinear_fallback_uses_inverse_distance(self):
        r = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
        w = inn_weights(r, np.array([0.1, 0.2]))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(w > 0)
        assert w[0] > w[1] > w[2]  # closer neighbors weigh more


class TestInnPlan:
    def test_exact_at_interpolation_nodes(self):
        demos = demo_set()
        for i, r in enumerate(demos.results):
            plan = inn_plan(r, demos)
            assert plan.frames == pytest.approx(demos.plans[i].frames, abs=1e-9)

    def test_output_is_affine_combination_of_neighbors(self):
        demos = demo_set()
        c = np.array([0.3, 0.25])
        plan = inn_plan(c, demos)
        order = np.argsort(np.linalg.norm(demos.results - c, axis=1), kind="stable")[:3]
        system = np.vstack([demos.results[order].T, np.ones(3)])
        w = np.linalg.solve(system, np.concatenate([c, [1.0]]))
        expected = np.tensordot(w, demos.frame_arrays()[order], axes=1)
        assert plan.frames == pytest.approx(expected, abs=1e-12)

    def test_needs_three_demos(self):
        demos = demo_set()
        small = LabeledDemoSet(plans=demos.plans[:2], results=demos.results[:2])
        with pytest.raises(ValueError):
            inn_plan([0.1, 0.1], small)

    def test_planner_clamps_to_limits(self):
        demos = demo_set()
        planner = InnPlanner(demos, ARM.limits_array())
        plan = planner.generate([3.0, -3.0], seed=0)  # far extrapolation
        lim = ARM.limits_array()
        assert np.all(plan.frames >= lim[:, 0]) and np.all(plan.frames <= lim[:, 1])


class TestAlignment:
    def base_plans(self, offsets):
        base = spline_motion(BASE_CONTROL_POINTS, 140, default_window(140), 0.02)
        plans = tuple(base.with_frames(shift_frames(base.frames, off))
                      for off in offsets)
        results = np.tile([0.65, 0.0], (len(plans), 1))
        return LabeledDemoSet(plans=plans, results=results)

    def test_peaks_move_to_median(self):
        base_peak = peak_speed_frame(
            spline_motion(BASE_CONTROL_POINTS, 140, default_window(140), 0.02), ARM)
        demos = self.base_plans([-3, 0, 3])
        peaks = [peak_speed_frame(p, ARM) for p in demos.plans]
        assert peaks == [base_peak - 3, base_peak, base_peak + 3]
        aligned = align_dataset(demos, ARM)
        aligned_peaks = [peak_speed_frame(p, ARM) for p in aligned.plans]
        assert aligned_peaks == [base_peak] * 3

    def test_already_aligned_set_unchanged(self):
        demos = self.base_plans([0, 0, 0])
        aligned = align_dataset(demos, ARM)
        for a, b in zip(aligned.plans, demos.plans):
            assert np.array_equal(a.frames, b.frames)

    def test_alignment_preserves_rollout_results(self):
        env = ProjectileEnv()
        priors = generate_priors(env, 6, seed=0)
        results = np.stack([env.rollout(p) for p in priors])
        demos = LabeledDemoSet(plans=tuple(priors), results=results)
        aligned = align_dataset(demos, env.arm)
        for plan, before in zip(aligned.plans, results):
            after = env.rollout(plan)
            assert np.linalg.norm(after - before) <= 0.02
