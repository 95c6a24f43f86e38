import numpy as np
import pytest

from adap.diffusion.schedule import make_schedule, q_sample


class TestCosineSchedule:
    sched = make_schedule()

    def test_default_timestep_count(self):
        assert self.sched.timesteps == 100
        assert self.sched.kind == "squaredcos_cap_v2"

    def test_alpha_bar_strictly_decreasing(self):
        abar = self.sched.alpha_bars
        assert abar[0] == 1.0
        assert np.all(np.diff(abar) < 0)

    def test_betas_in_range(self):
        betas = self.sched.betas[1:]
        assert np.all(betas > 0) and np.all(betas <= 0.999)

    def test_first_alpha_bar_close_to_one(self):
        # direct evaluation of the cosine formula at t=1
        f = lambda t: np.cos(((t / 100 + 0.008) / 1.008) * np.pi / 2) ** 2
        assert self.sched.alpha_bars[1] == pytest.approx(f(1) / f(0), rel=1e-12)
        assert self.sched.alpha_bars[1] >= 0.999

    def test_sigma_starts_at_zero(self):
        sig = self.sched.sigmas
        assert sig[1] == 0.0
        assert np.all(sig[2:] > 0)

    def test_fixed_small_variance_formula(self):
        s = self.sched
        t = 37
        var = s.betas[t] * (1 - s.alpha_bars[t - 1]) / (1 - s.alpha_bars[t])
        assert s.sigmas[t] == pytest.approx(np.sqrt(var), rel=1e-12)


def test_linear_schedule_mode():
    sched = make_schedule(50, kind="linear", beta_start=1e-4, beta_end=0.02)
    assert sched.betas[1] == pytest.approx(1e-4)
    assert sched.betas[-1] == pytest.approx(0.02)
    assert np.all(np.diff(sched.alpha_bars) < 0)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        make_schedule(kind="cosine_but_wrong")


class TestQSample:
    sched = make_schedule()

    def test_zero_noise_scales_input(self):
        x0 = np.random.default_rng(0).standard_normal((3, 8))
        t = 42
        got = q_sample(x0, t, np.zeros_like(x0), self.sched)
        assert got == pytest.approx(np.sqrt(self.sched.alpha_bars[t]) * x0, rel=1e-15)

    def test_zero_signal_scales_noise(self):
        noise = np.random.default_rng(1).standard_normal((3, 8))
        got = q_sample(np.zeros_like(noise), 100, noise, self.sched)
        assert got == pytest.approx(np.sqrt(1 - self.sched.alpha_bars[100]) * noise)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x0, noise = rng.standard_normal((2, 4, 6))
        t = np.array([10, 20, 30, 90])
        a = q_sample(2 * x0, t, 3 * noise, self.sched)
        b = 2 * q_sample(x0, t, np.zeros_like(noise), self.sched) \
            + 3 * q_sample(np.zeros_like(x0), t, noise, self.sched)
        assert a == pytest.approx(b, rel=1e-12)

    def test_moments_monte_carlo(self):
        # Var(x_t) = abar_t Var(x0) + (1 - abar_t) for unit-variance noise
        rng = np.random.default_rng(3)
        n = 100_000
        x0 = np.full((n, 1), 0.7)
        for t in (5, 50, 100):
            noise = rng.standard_normal((n, 1))
            x_t = q_sample(x0, t, noise, self.sched)
            abar = self.sched.alpha_bars[t]
            assert np.mean(x_t) == pytest.approx(np.sqrt(abar) * 0.7, abs=0.01)
            expected_var = 1.0 - abar  # Var(x0) = 0 here
            if expected_var > 1e-4:
                assert np.var(x_t) == pytest.approx(expected_var, rel=0.02)
