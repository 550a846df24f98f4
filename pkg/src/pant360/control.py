"""Spatial control: payload record/inject and structure/appearance guidance.

Two mechanisms plug into the tiled translation.  Injection replaces the
denoiser's recorded intermediates (features, attention) with ones from an
untiled source trajectory; guidance adds an analytic eps-space gradient of
two quadratic energies pulling the predicted clean latent toward a pooled
structure target and a per-channel appearance target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InjectionError, ValidationError
from .denoisers import ATTENTION_SITE, FEATURE_SITE, null_conditioning
from .schedule import NoiseSchedule, TrajectoryRecord, run_sampling
from .tensors import DTYPE, ColumnRange

POOL_BLOCK = 4


@dataclass(frozen=True)
class InjectionPolicy:
    """Which payload sites to inject and for what fraction of the steps.

    Injection is active at step t (t in {T..1}) iff (T - t)/T < fraction,
    i.e. for the earliest (noisiest) fraction of the denoising steps.
    """

    feature_until: float = 0.8
    attention_until: float = 0.5
    sites: tuple = (FEATURE_SITE, ATTENTION_SITE)

    def __post_init__(self):
        for name, frac in (("feature_until", self.feature_until),
                           ("attention_until", self.attention_until)):
            if not 0.0 <= frac <= 1.0:
                raise ValidationError(f"{name} = {frac} outside [0, 1]")

    def _active(self, frac: float, t_pos: int, total: int) -> bool:
        return (total - t_pos) / total < frac

    def active_sites(self, t_pos: int, total: int):
        out = []
        if FEATURE_SITE in self.sites and self._active(self.feature_until, t_pos, total):
            out.append(FEATURE_SITE)
        if ATTENTION_SITE in self.sites and self._active(self.attention_until, t_pos, total):
            out.append(ATTENTION_SITE)
        return out


def record_source_trajectory(
    x_T,
    denoiser,
    noise_schedule: NoiseSchedule,
    keep_latents: bool = False,
) -> TrajectoryRecord:
    """Untiled null-prompt denoising of the source latent, recording payloads."""
    _, record = run_sampling(
        x_T,
        denoiser,
        null_conditioning(),
        noise_schedule,
        record_payloads=True,
        keep_latents=keep_latents,
    )
    return record


def inject_controls(
    policy: InjectionPolicy,
    record: TrajectoryRecord,
    t_pos: int,
    total_steps: int,
    window_range: ColumnRange | None,
    latent_width: int | None = None,
    halo: int = 1,
):
    """Payloads for one window at one step, cropped with a halo of `halo` columns.

    The halo lets the consumer's 3x3 stage see the true neighbours of the
    window, keeping windowed injection exactly consistent with the recorded
    full-latent pass.  `window_range=None` returns full-width payloads.
    """
    out = {}
    for site in policy.active_sites(t_pos, total_steps):
        key = (t_pos, site)
        if key not in record.payloads:
            raise InjectionError(site, f"no recorded payload for step {t_pos}")
        payload = record.payloads[key]
        if window_range is None:
            out[site] = payload
        else:
            if latent_width is None:
                latent_width = payload.shape[-1]
            idx = window_range.with_halo(halo, latent_width).indices(latent_width)
            out[site] = np.take(payload, idx, axis=-1)
    return out


class InjectionControls:
    """Adapter feeding recorded payloads into the tiled translation."""

    def __init__(self, policy: InjectionPolicy, record: TrajectoryRecord,
                 total_steps: int, latent_width: int):
        self.policy = policy
        self.record = record
        self.total_steps = total_steps
        self.latent_width = latent_width

    def injected_payloads(self, t_pos: int, window_range):
        return inject_controls(
            self.policy, self.record, t_pos, self.total_steps,
            window_range, self.latent_width,
        )

    def eps_correction(self, x, eps, t_pos, abar_t, window_range):
        return None


def pool_block(x, block: int = POOL_BLOCK):
    c, h, w = x.shape
    if h % block or w % block:
        raise ValidationError(f"latent dims {h}x{w} not divisible by pool block {block}")
    return x.reshape(c, h // block, block, w // block, block).mean(axis=(2, 4))


def channel_mean(x):
    return x.mean(axis=(1, 2))


@dataclass
class GuidanceSpec:
    """Weights and frozen targets of the two quadratic control energies."""

    structure_weight: float
    appearance_weight: float
    structure_target: np.ndarray = field(repr=False)
    appearance_target: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.structure_weight) and self.structure_weight >= 0):
            raise ValidationError(f"structure_weight {self.structure_weight} invalid")
        if not (math.isfinite(self.appearance_weight) and self.appearance_weight >= 0):
            raise ValidationError(f"appearance_weight {self.appearance_weight} invalid")


def make_guidance_spec(source_latent, structure_weight: float,
                       appearance_weight: float) -> GuidanceSpec:
    """Freeze targets from the source latent the inversion started from."""
    return GuidanceSpec(
        structure_weight=float(structure_weight),
        appearance_weight=float(appearance_weight),
        structure_target=pool_block(np.asarray(source_latent)),
        appearance_target=channel_mean(np.asarray(source_latent)),
    )


def structure_energy(x0_hat, target):
    d = pool_block(x0_hat) - target
    return 0.5 * float(np.sum(d * d))


def appearance_energy(x0_hat, target):
    """Per-channel mean mismatch, weighted so one unit of appearance weight
    pulls the channel means at the same per-step rate as the structure term
    pulls the pooled cells (both gradients scale as residual / pool area)."""
    c, h, w = x0_hat.shape
    d = channel_mean(x0_hat) - target
    return 0.5 * float(h * w / (POOL_BLOCK * POOL_BLOCK)) * float(np.sum(d * d))


def guidance_gradients(x_t, eps, abar_t: float, spec: GuidanceSpec,
                       structure_target=None, appearance_target=None):
    """Analytic gradient of (ws*Es + wa*Ea) with respect to x_t.

    x0_hat = (x_t - sqrt(1-abar)*eps)/sqrt(abar) with eps treated as constant,
    so the x_t gradient is the x0_hat gradient divided by sqrt(abar).  The
    eps-space scaling lives in GuidanceControls, keeping this function a pure
    derivative that a finite-difference oracle can check directly.
    """
    if abar_t <= 0:
        raise ValidationError(f"non-positive abar {abar_t}")
    if structure_target is None:
        structure_target = spec.structure_target
    if appearance_target is None:
        appearance_target = spec.appearance_target
    sqrt_abar = math.sqrt(abar_t)
    x0_hat = (x_t - math.sqrt(1.0 - abar_t) * eps) / sqrt_abar

    grad_x0 = np.zeros_like(x0_hat, dtype=np.float64)
    block = POOL_BLOCK
    if spec.structure_weight > 0:
        resid = pool_block(x0_hat) - structure_target
        spread = np.repeat(np.repeat(resid, block, axis=1), block, axis=2)
        grad_x0 += spec.structure_weight * spread / (block * block)
    if spec.appearance_weight > 0:
        resid = channel_mean(x0_hat) - appearance_target
        grad_x0 += spec.appearance_weight * resid[:, None, None] / (block * block)

    return (grad_x0 / sqrt_abar).astype(x_t.dtype)


class GuidanceControls:
    """Adapter applying guidance inside every window, targets column-cropped."""

    def __init__(self, spec: GuidanceSpec, latent_width: int):
        self.spec = spec
        self.latent_width = latent_width
        self.pooled_width = latent_width // POOL_BLOCK

    def injected_payloads(self, t_pos, window_range):
        return None

    def _window_structure_target(self, window_range: ColumnRange):
        if window_range is None:
            return self.spec.structure_target
        if window_range.start % POOL_BLOCK or window_range.length % POOL_BLOCK:
            raise ValidationError(
                f"window range ({window_range.start}, {window_range.length}) not "
                f"aligned to pool block {POOL_BLOCK}"
            )
        r = ColumnRange(
            window_range.start // POOL_BLOCK,
            window_range.length // POOL_BLOCK,
            wrap=True,
        )
        idx = r.indices(self.pooled_width)
        return np.take(self.spec.structure_target, idx, axis=-1)

    def eps_correction(self, x, eps, t_pos, abar_t, window_range):
        if self.spec.structure_weight == 0 and self.spec.appearance_weight == 0:
            return None
        grad = guidance_gradients(
            x, eps, abar_t, self.spec,
            structure_target=self._window_structure_target(window_range),
        )
        # eps-space scaling chosen so each step moves the predicted clean
        # latent downhill by exactly one unit of its own gradient, at every
        # noise level: delta(x0_hat) = -sqrt(1-abar)/sqrt(abar) * correction,
        # so correction = abar/sqrt(1-abar) * grad_xt inverts that lever.
        # (The bare chain-rule mapping diverges as abar -> 0 and blows up
        # pure-noise starts.)
        scale = abar_t / math.sqrt(1.0 - abar_t)
        return (DTYPE(scale) * grad).astype(DTYPE)
