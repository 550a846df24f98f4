"""Seamless tiling translation: window schedule, stitch patch, blended steps.

Each denoising step crops overlapping windows from the latent, denoises and
DDIM-steps each window independently, places the results back additively, and
divides by the per-cell coverage count.  The stitch patch splices the latent's
tail and head columns so the wrap region is denoised as one contiguous patch;
it is evaluated once and counted twice, which is bitwise-equivalent to the
literal double evaluation for a deterministic denoiser.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, StageError, ValidationError
from .schedule import NoiseSchedule, ddim_sample_step
from .tensors import DTYPE, ColumnRange, crop_columns, place_columns_accumulate


@dataclass(frozen=True)
class WindowSchedule:
    """Window geometry over a latent of width 2w (w = image width / 8)."""

    image_width: int
    omega: int
    mode: str
    latent_width: int
    window_width: int
    regular: tuple
    stitch: ColumnRange | None

    def windows(self):
        """(label, range, multiplicity) triples in fixed accumulation order."""
        out = [(f"window@{r.start}", r, 1) for r in self.regular]
        if self.stitch is not None:
            out.append(("stitch", self.stitch, 2))
        return out

    def describe(self) -> str:
        lines = [
            f"image_width = {self.image_width}",
            f"omega = {self.omega}",
            f"mode = {self.mode}",
            f"latent_width = {self.latent_width}",
            f"window_width = {self.window_width}",
            "regular_starts = " + " ".join(str(r.start) for r in self.regular),
        ]
        if self.stitch is not None:
            s = self.stitch
            lines.append(
                f"stitch = [{s.start}, {self.latent_width}) + [0, "
                f"{(s.start + s.length) % self.latent_width})"
            )
        cov = coverage_counts(self)
        hist = {}
        for v in cov:
            hist[int(v)] = hist.get(int(v), 0) + 1
        lines.append(
            "coverage_histogram = "
            + " ".join(f"{k}:{hist[k]}" for k in sorted(hist))
        )
        return "\n".join(lines)


def build_schedule(width: int, omega: int, mode: str = "paper") -> WindowSchedule:
    problems = []
    if mode not in ("paper", "circular"):
        problems.append(f"mode {mode!r} must be 'paper' or 'circular'")
    if width % 16 != 0:
        problems.append(f"width {width} is not a multiple of 16")
    if omega < 1:
        problems.append(f"omega {omega} < 1")
    elif width % (8 * omega) != 0:
        problems.append(f"8*omega = {8 * omega} does not divide width {width}")
    if problems:
        raise ValidationError(problems)

    w = width // 8
    latent_width = 2 * w
    if mode == "paper":
        regular = tuple(
            ColumnRange(s, w, wrap=False) for s in range(0, w + 1, omega)
        )
        stitch = ColumnRange(latent_width - w // 2, w, wrap=True)
    else:
        regular = tuple(
            ColumnRange(s, w, wrap=True) for s in range(0, latent_width, omega)
        )
        stitch = None
    return WindowSchedule(
        image_width=width,
        omega=omega,
        mode=mode,
        latent_width=latent_width,
        window_width=w,
        regular=regular,
        stitch=stitch,
    )


def coverage_counts(schedule: WindowSchedule) -> np.ndarray:
    """Per-column window coverage (the weight field collapsed over rows)."""
    counts = np.zeros(schedule.latent_width, dtype=DTYPE)
    for _, r, mult in schedule.windows():
        idx = r.indices(schedule.latent_width)
        for _ in range(mult):
            counts[idx] += 1.0
    return counts


def blended_step(
    x_t,
    schedule: WindowSchedule,
    denoiser,
    conditioning,
    abar_t: float,
    abar_prev: float,
    t_train: int,
    t_pos: int,
    controls=None,
    threads: int = 1,
):
    """One seamless-tiling denoising step x_t -> x_{t-1}."""
    if x_t.shape[-1] != schedule.latent_width:
        raise ValidationError(
            f"latent width {x_t.shape[-1]} != schedule width {schedule.latent_width}"
        )
    windows = schedule.windows()

    def evaluate(item):
        label, r, _ = item
        xw = crop_columns(x_t, r)
        injected = controls.injected_payloads(t_pos, r) if controls else None
        try:
            eps, _ = denoiser.predict(xw, t_train, conditioning, injected=injected)
        except Exception as exc:
            raise StageError(f"{label} at t={t_pos}", exc) from exc
        if controls is not None:
            corr = controls.eps_correction(xw, eps, t_pos, abar_t, r)
            if corr is not None:
                eps = eps + corr
        return ddim_sample_step(xw, eps, abar_t, abar_prev)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, windows))
    else:
        results = [evaluate(item) for item in windows]

    # accumulate in float64: per-cell summation order varies across cells, and
    # late DDIM steps amplify rounding asymmetries by orders of magnitude
    out = np.zeros(x_t.shape, dtype=np.float64)
    weights = np.zeros(x_t.shape[1:], dtype=np.float64)
    # accumulation order is fixed (regular windows by index, stitch last)
    for (label, r, mult), res in zip(windows, results):
        for _ in range(mult):
            place_columns_accumulate(out, res, r, weights)
    if np.any(weights < 1.0):
        raise CoverageError("window schedule leaves latent cells uncovered")
    return (out / weights[None, :, :]).astype(DTYPE)


def run_tiled_translation(
    x_T,
    schedule: WindowSchedule,
    denoiser,
    conditioning,
    noise_schedule: NoiseSchedule,
    controls=None,
    threads: int = 1,
    step_callback=None,
):
    """Fold blended steps over all DDIM positions; returns the final latent."""
    x = np.asarray(x_T, dtype=DTYPE)
    for pos in range(noise_schedule.ddim_steps - 1, -1, -1):
        x = blended_step(
            x,
            schedule,
            denoiser,
            conditioning,
            noise_schedule.abar(pos),
            noise_schedule.abar(pos - 1),
            int(noise_schedule.timesteps[pos]),
            pos + 1,
            controls=controls,
            threads=threads,
        )
        if step_callback is not None:
            step_callback(pos + 1, x)
    return x
