import numpy as np
import pytest
import torch

from xscene.schedule import DiffusionSchedule, repaint_time_sequence


class TestCosineSchedule:
    def test_table_invariants(self):
        for timesteps in (10, 100, 1000):
            sched = DiffusionSchedule.cosine(timesteps)
            ab = sched.alpha_bar
            assert ab[0] == 1.0
            assert np.all(np.diff(ab) < 0)
            assert np.all(ab > 0) and np.all(ab <= 1)
            assert ab[-1] < 0.01

    def test_betas_consistent_with_alpha_bar(self):
        sched = DiffusionSchedule.cosine(50)
        rebuilt = np.concatenate([[1.0], np.cumprod(1.0 - sched.betas)])
        np.testing.assert_allclose(rebuilt, sched.alpha_bar, atol=1e-12)

    def test_doc_round_trip(self):
        sched = DiffusionSchedule.cosine(100, cfg_scale=1.2, sampler="ancestral")
        again = DiffusionSchedule.from_doc(sched.to_doc())
        np.testing.assert_array_equal(again.alpha_bar, sched.alpha_bar)
        assert again.cfg_scale == 1.2


class TestReverseStep:
    def test_final_step_is_deterministic_mean(self):
        sched = DiffusionSchedule.cosine(10)
        x = torch.randn(4, 3)
        eps = torch.randn(4, 3)
        a = sched.reverse_step(x, 1, eps, torch.randn(4, 3))
        b = sched.reverse_step(x, 1, eps, torch.randn(4, 3))
        np.testing.assert_allclose(a.numpy(), b.numpy())

    def test_reverse_step_matches_scalar_formula(self):
        sched = DiffusionSchedule.cosine(10)
        t = 5
        x = torch.tensor([0.7], dtype=torch.float64)
        eps = torch.tensor([-0.3], dtype=torch.float64)
        z = torch.tensor([0.9], dtype=torch.float64)
        beta = sched.betas[t - 1]
        ab_t = sched.alpha_bar[t]
        ab_prev = sched.alpha_bar[t - 1]
        mean = (0.7 - beta / np.sqrt(1 - ab_t) * (-0.3)) / np.sqrt(1 - beta)
        var = beta * (1 - ab_prev) / (1 - ab_t)
        expected = mean + np.sqrt(var) * 0.9
        got = sched.reverse_step(x, t, eps, z)
        assert float(got) == pytest.approx(expected, abs=1e-12)

    def test_t_out_of_range_rejected(self):
        sched = DiffusionSchedule.cosine(10)
        with pytest.raises(ValueError):
            sched.reverse_step(torch.zeros(1), 0, torch.zeros(1), torch.zeros(1))

    def test_ddim_step_reaches_x0_estimate_at_zero(self):
        sched = DiffusionSchedule.cosine(100)
        x0 = torch.randn(5)
        eps = torch.randn(5)
        t = 60
        ab = sched.alpha_bar[t]
        x_t = np.sqrt(ab) * x0 + np.sqrt(1 - ab) * eps
        # One exact jump to t=0 recovers x0 when eps_hat equals the true noise.
        got = sched.ddim_step(x_t, t, 0, eps)
        np.testing.assert_allclose(got.numpy(), x0.numpy(), atol=1e-6)

    def test_strided_times_cover_range(self):
        sched = DiffusionSchedule.cosine(100)
        times = sched.strided_times(20)
        assert times[0] == 100
        assert times[-1] == 0
        assert all(a > b for a, b in zip(times, times[1:]))


class TestRepaintSequence:
    def test_plain_descent_without_resampling(self):
        seq = repaint_time_sequence(10, jump_length=3, n_resample=1)
        assert seq == list(range(10, -1, -1))

    def test_moves_are_unit_steps(self):
        seq = repaint_time_sequence(50, jump_length=10, n_resample=3)
        for a, b in zip(seq, seq[1:]):
            assert abs(a - b) == 1

    def test_jump_points_revisited_n_times(self):
        jump, n = 20, 5
        seq = repaint_time_sequence(100, jump_length=jump, n_resample=n)
        # Each jump anchor below T is visited n times on the way down.
        for anchor in range(0, 100 - jump, jump):
            descents = sum(
                1 for a, b in zip(seq, seq[1:]) if a == anchor + 1 and b == anchor
            )
            assert descents == n

    def test_terminates_at_zero(self):
        seq = repaint_time_sequence(100, 20, 5)
        assert seq[-1] == 0
        assert max(seq) == 100
