"""Noise schedule construction, DDIM stepping, and trajectory runners."""

import math

import numpy as np
import pytest

from pant360.denoisers import (
    make_denoiser,
    null_conditioning,
    prompt_conditioning,
)
from pant360.errors import StageError, ValidationError
from pant360.evalkit import halves_discrepancy
from pant360.schedule import (
    NoiseSchedule,
    ddim_invert_step,
    ddim_sample_step,
    run_inversion,
    run_sampling,
)


@pytest.fixture
def sched():
    return NoiseSchedule.make(1000, 1e-4, 0.02, 50)


class TestNoiseSchedule:
    def test_alpha_bar_strictly_decreasing_and_positive(self, sched):
        assert np.all(sched.alpha_bar > 0)
        assert np.all(np.diff(sched.alpha_bar) < 0)

    def test_timesteps_evenly_strided(self, sched):
        assert list(sched.timesteps) == [20 * k - 1 for k in range(1, 51)]

    def test_abar_clean_level_is_one(self, sched):
        assert sched.abar(-1) == 1.0

    def test_invalid_params_rejected(self):
        with pytest.raises(ValidationError):
            NoiseSchedule.make(train_steps=0)
        with pytest.raises(ValidationError):
            NoiseSchedule.make(beta_start=0.0)
        with pytest.raises(ValidationError):
            NoiseSchedule.make(beta_start=0.5, beta_end=0.1)
        with pytest.raises(ValidationError):
            NoiseSchedule.make(ddim_steps=2000)


class TestDdimSteps:
    def test_zero_eps_closed_form(self):
        x = np.full((1, 1, 1), 1.0, np.float32)
        out = ddim_sample_step(x, np.zeros_like(x), 0.5, 0.8)
        assert np.isclose(out[0, 0, 0], math.sqrt(0.8 / 0.5), atol=1e-6)
        assert np.isclose(out[0, 0, 0], 1.264911, atol=1e-5)

    def test_equal_abar_with_zero_eps_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 3, 4)).astype(np.float32)
        out = ddim_sample_step(x, np.zeros_like(x), 0.7, 0.7)
        assert np.allclose(out, x, atol=1e-6)

    def test_pure_noise_direction(self):
        rng = np.random.default_rng(1)
        eps = rng.standard_normal((2, 3, 4)).astype(np.float32)
        abar_t, abar_prev = 0.4, 0.9
        x = np.float32(math.sqrt(1 - abar_t)) * eps
        out = ddim_sample_step(x, eps, abar_t, abar_prev)
        assert np.allclose(out, math.sqrt(1 - abar_prev) * eps, atol=1e-6)

    def test_invert_then_sample_same_eps_is_identity(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 5, 6)).astype(np.float32)
        eps = rng.standard_normal((4, 5, 6)).astype(np.float32)
        up = ddim_invert_step(x, eps, 0.8, 0.3)
        back = ddim_sample_step(up, eps, 0.3, 0.8)
        assert np.allclose(back, x, atol=1e-6)

    def test_zero_eps_inversion_scaling(self):
        x = np.full((1, 1, 1), 2.0, np.float32)
        out = ddim_invert_step(x, np.zeros_like(x), 0.9, 0.4)
        assert np.isclose(out[0, 0, 0], 2.0 * math.sqrt(0.4 / 0.9), atol=1e-6)

    def test_ordering_preconditions(self):
        x = np.zeros((1, 1, 1), np.float32)
        with pytest.raises(ValidationError):
            ddim_sample_step(x, x, 0.8, 0.3)
        with pytest.raises(ValidationError):
            ddim_invert_step(x, x, 0.3, 0.8)

    def test_non_positive_abar_rejected(self):
        x = np.zeros((1, 1, 1), np.float32)
        with pytest.raises(ValidationError):
            ddim_sample_step(x, x, 0.0, 0.5)


class TestRunners:
    def test_zero_eps_inversion_is_rescaling_chain(self, sched):
        rng = np.random.default_rng(3)
        x0 = rng.standard_normal((4, 4, 8)).astype(np.float32)
        den = make_denoiser("zero")
        x_T, record = run_inversion(x0, den, null_conditioning(), sched)
        expected = x0 * np.float32(math.sqrt(sched.abar(sched.ddim_steps - 1)))
        assert np.allclose(x_T, expected, atol=1e-6)
        assert len(record.steps) == 50

    def test_zero_eps_full_round_trip(self, sched):
        rng = np.random.default_rng(4)
        x0 = rng.standard_normal((4, 16, 64)).astype(np.float32)
        den = make_denoiser("zero")
        x_T, _ = run_inversion(x0, den, null_conditioning(), sched)
        back, _ = run_sampling(x_T, den, null_conditioning(), sched)
        assert np.abs(back - x0).max() <= 1e-5

    def test_nontrivial_round_trip_error_shrinks_with_steps(self):
        # Inversion and sampling evaluate eps at adjacent noise levels, so the
        # round trip carries an O(1/steps) discretization error for any
        # denoiser whose eps actually depends on x; it is not expected to hit
        # the zero-eps tolerance.
        rng = np.random.default_rng(5)
        x0 = rng.standard_normal((4, 4, 8)).astype(np.float32)
        errs = {}
        for steps in (25, 50, 200):
            sch = NoiseSchedule.make(1000, 1e-4, 0.02, steps)
            den = make_denoiser("linear-gauss", schedule=sch)
            x_T, _ = run_inversion(x0, den, null_conditioning(), sch)
            back, _ = run_sampling(x_T, den, null_conditioning(), sch)
            errs[steps] = float(np.abs(back - x0).max())
        assert errs[200] < errs[50] < errs[25]
        assert errs[50] < 0.02

    def test_conv_toy_round_trip_bounded(self, sched):
        rng = np.random.default_rng(6)
        x0 = rng.standard_normal((4, 4, 8)).astype(np.float32)
        den = make_denoiser("conv-toy", seed=7)
        x_T, _ = run_inversion(x0, den, null_conditioning(), sched)
        back, _ = run_sampling(x_T, den, null_conditioning(), sched)
        assert float(np.abs(back - x0).max()) < 0.5

    def test_half_symmetric_inversion_stays_half_symmetric(self, sched):
        rng = np.random.default_rng(7)
        half = rng.standard_normal((4, 4, 8)).astype(np.float32)
        x0 = np.concatenate([half, half], axis=2)
        den = make_denoiser("conv-toy", seed=7)
        _, record = run_inversion(x0, den, null_conditioning(), sched,
                                  keep_latents=True)
        for lat in record.latents:
            hmax, _ = halves_discrepancy(lat)
            assert hmax <= 1e-6

    def test_sampling_record_contents(self, sched):
        rng = np.random.default_rng(8)
        x_T = rng.standard_normal((4, 4, 8)).astype(np.float32)
        den = make_denoiser("conv-toy", seed=1)
        x0, record = run_sampling(x_T, den, null_conditioning(), sched,
                                  record_payloads=True, keep_latents=True)
        assert record.steps == list(range(50, 0, -1))
        assert len(record.latents) == 50
        assert len(record.payloads) == 2 * 50  # two sites per step
        assert np.array_equal(record.final, x0)

    def test_linear_gauss_sampling_converges_toward_mean(self, sched):
        den = make_denoiser("linear-gauss", schedule=sched, mean=0.3, var=1.0)
        rng = np.random.default_rng(9)
        x_T = rng.standard_normal((4, 8, 8)).astype(np.float32)
        _, record = run_sampling(x_T, den, null_conditioning(), sched,
                                 keep_latents=True)
        devs = [float(np.abs(lat - 0.3).mean()) for lat in record.latents]
        assert all(b <= a + 1e-6 for a, b in zip(devs, devs[1:]))

    def test_denoiser_failure_annotated_with_step(self, sched):
        class Boom:
            def predict(self, x, t, cond, injected=None):
                raise RuntimeError("boom")

        x = np.zeros((4, 4, 8), np.float32)
        with pytest.raises(StageError) as err:
            run_inversion(x, Boom(), null_conditioning(), sched)
        assert "inversion step" in str(err.value)

    def test_prompt_changes_sampling_output(self, sched):
        den = make_denoiser("linear-gauss", schedule=sched)
        rng = np.random.default_rng(10)
        x_T = rng.standard_normal((4, 4, 8)).astype(np.float32)
        a, _ = run_sampling(x_T, den, null_conditioning(), sched)
        b, _ = run_sampling(x_T, den, prompt_conditioning("sunset"), sched)
        assert not np.array_equal(a, b)
