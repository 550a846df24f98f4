"""Noise schedule, deterministic DDIM stepping, and trajectory runners.

All updates are the deterministic (eta = 0) DDIM rule:

    x0_hat  = (x_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)
    x_next  = sqrt(abar_next) * x0_hat + sqrt(1 - abar_next) * eps

run with abar decreasing for sampling and increasing for inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StageError, ValidationError
from .tensors import DTYPE


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear-beta training schedule with an evenly strided DDIM subsequence."""

    train_steps: int
    beta_start: float
    beta_end: float
    ddim_steps: int
    alpha_bar: np.ndarray = field(repr=False)
    timesteps: np.ndarray = field(repr=False)

    @classmethod
    def make(
        cls,
        train_steps: int = 1000,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        ddim_steps: int = 50,
    ) -> "NoiseSchedule":
        problems = []
        if train_steps < 1:
            problems.append(f"train_steps {train_steps} < 1")
        if not 0 < beta_start <= beta_end < 1:
            problems.append(
                f"betas ({beta_start}, {beta_end}) must satisfy 0 < start <= end < 1"
            )
        if not 1 <= ddim_steps <= train_steps:
            problems.append(f"ddim_steps {ddim_steps} outside [1, {train_steps}]")
        if problems:
            raise ValidationError(problems)
        betas = np.linspace(beta_start, beta_end, train_steps, dtype=np.float64)
        alpha_bar = np.cumprod(1.0 - betas)
        if np.any(alpha_bar <= 0) or np.any(np.diff(alpha_bar) >= 0):
            raise ValidationError("alpha_bar must be positive and strictly decreasing")
        stride = train_steps // ddim_steps
        timesteps = np.arange(1, ddim_steps + 1) * stride - 1
        return cls(
            train_steps=train_steps,
            beta_start=beta_start,
            beta_end=beta_end,
            ddim_steps=ddim_steps,
            alpha_bar=alpha_bar,
            timesteps=timesteps,
        )

    def abar(self, pos: int) -> float:
        """Cumulative alpha at DDIM position `pos`; pos == -1 is the clean level."""
        if pos < 0:
            return 1.0
        return float(self.alpha_bar[self.timesteps[pos]])


def _ddim_shift(x, eps, abar_from: float, abar_to: float):
    if abar_from <= 0 or abar_to <= 0:
        raise ValidationError(f"non-positive alpha_bar ({abar_from}, {abar_to})")
    sqrt_from = math.sqrt(abar_from)
    x0_hat = (x - DTYPE(math.sqrt(1.0 - abar_from)) * eps) / DTYPE(sqrt_from)
    return DTYPE(math.sqrt(abar_to)) * x0_hat + DTYPE(math.sqrt(1.0 - abar_to)) * eps


def ddim_sample_step(x_t, eps, abar_t: float, abar_prev: float):
    """One deterministic denoising step toward lower noise."""
    if not abar_t <= abar_prev <= 1.0:
        raise ValidationError(
            f"sampling requires abar_t <= abar_prev <= 1, got ({abar_t}, {abar_prev})"
        )
    return _ddim_shift(x_t, eps, abar_t, abar_prev)


def ddim_invert_step(x_t, eps, abar_t: float, abar_next: float):
    """One deterministic inversion step toward higher noise."""
    if not abar_next <= abar_t <= 1.0:
        raise ValidationError(
            f"inversion requires abar_next <= abar_t <= 1, got ({abar_t}, {abar_next})"
        )
    return _ddim_shift(x_t, eps, abar_t, abar_next)


@dataclass
class TrajectoryRecord:
    """Per-step latents and control payloads emitted along one trajectory."""

    steps: list = field(default_factory=list)
    latents: list = field(default_factory=list)
    payloads: dict = field(default_factory=dict)
    final: np.ndarray | None = None

    def add_payloads(self, step: int, emitted: dict) -> None:
        for site, tensor in emitted.items():
            key = (step, site)
            if key in self.payloads:
                raise ValidationError(f"duplicate payload for step {step}, site {site!r}")
            self.payloads[key] = tensor


def run_inversion(
    x0,
    denoiser,
    conditioning,
    schedule: NoiseSchedule,
    keep_latents: bool = False,
):
    """Iterate inversion steps from the clean latent; returns (x_T, record)."""
    record = TrajectoryRecord()
    x = np.asarray(x0, dtype=DTYPE)
    for pos in range(schedule.ddim_steps):
        t_train = int(schedule.timesteps[pos])
        try:
            eps, _ = denoiser.predict(x, t_train, conditioning)
        except Exception as exc:  # annotate with step context
            raise StageError(f"inversion step pos={pos} t={t_train}", exc) from exc
        x = ddim_invert_step(x, eps, schedule.abar(pos - 1), schedule.abar(pos))
        record.steps.append(pos + 1)
        if keep_latents:
            record.latents.append(x.copy())
    record.final = x
    return x, record


def run_sampling(
    x_T,
    denoiser,
    conditioning,
    schedule: NoiseSchedule,
    controls=None,
    record_payloads: bool = False,
    keep_latents: bool = False,
):
    """Untiled DDIM sampling over all steps; returns (x_0, record).

    `controls`, when given, supplies injected payloads for each step (full
    latent width, no window cropping).
    """
    record = TrajectoryRecord()
    x = np.asarray(x_T, dtype=DTYPE)
    for pos in range(schedule.ddim_steps - 1, -1, -1):
        t_pos = pos + 1
        t_train = int(schedule.timesteps[pos])
        injected = controls.injected_payloads(t_pos, None) if controls else None
        try:
            eps, emitted = denoiser.predict(x, t_train, conditioning, injected=injected)
        except Exception as exc:
            raise StageError(f"sampling step t={t_pos}", exc) from exc
        if controls is not None:
            corr = controls.eps_correction(x, eps, t_pos, schedule.abar(pos), None)
            if corr is not None:
                eps = eps + corr
        x = ddim_sample_step(x, eps, schedule.abar(pos), schedule.abar(pos - 1))
        record.steps.append(t_pos)
        if record_payloads:
            record.add_payloads(t_pos, emitted)
        if keep_latents:
            record.latents.append(x.copy())
    record.final = x
    return x, record
