"""Synthetic circular corpus, seam/halves metrics, and the sweep harness."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .errors import PantError, ValidationError
from .geometry import ExtendSpec, count_matching_windows
from .tensors import DTYPE


@dataclass(frozen=True)
class SeamReport:
    """Wrap-column discrepancy relative to interior column gradients."""

    wrap_gap: float
    interior_gap: float
    seam_ratio: float


def seam_metric(img: np.ndarray) -> SeamReport:
    w = img.shape[-1]
    if w < 2:
        raise ValidationError(f"width {w} < 2")
    wrap_gap = float(np.mean(np.abs(img[..., 0] - img[..., w - 1])))
    interior_gap = float(np.mean(np.abs(np.diff(img, axis=-1))))
    if interior_gap == 0.0:
        ratio = 1.0 if wrap_gap == 0.0 else float("inf")
    else:
        ratio = wrap_gap / interior_gap
    return SeamReport(wrap_gap=wrap_gap, interior_gap=interior_gap, seam_ratio=ratio)


def block_downsample(img: np.ndarray, factor: int = 8) -> np.ndarray:
    """Block means, one sample per codec cell.

    Decoded images are piecewise constant over codec blocks, which dilutes
    per-column interior gaps by the block factor; measuring the seam at cell
    resolution keeps the ratio ~1 for seamless decoded outputs.
    """
    c, h, w = img.shape
    if h % factor or w % factor:
        raise ValidationError(f"dims {h}x{w} not divisible by {factor}")
    return img.reshape(c, h // factor, factor, w // factor, factor).mean(
        axis=(2, 4), dtype=DTYPE
    )


def halves_discrepancy(t: np.ndarray):
    """(max, mean) absolute difference between the left and right halves."""
    w = t.shape[-1]
    if w % 2:
        raise ValidationError(f"width {w} is odd")
    d = np.abs(t[..., : w // 2] - t[..., w // 2 :])
    return float(d.max()), float(d.mean())


def synth_panorama(seed: int, width: int, height: int, harmonics: int = 4) -> np.ndarray:
    """Sum of sinusoids with integer horizontal frequencies: circular by construction."""
    if harmonics < 1:
        raise ValidationError(f"harmonics {harmonics} < 1")
    rng = np.random.default_rng(seed)
    x = np.arange(width)[None, :] / width
    y = np.arange(height)[:, None] / height
    img = np.zeros((3, height, width), dtype=np.float64)
    for c in range(3):
        for _ in range(harmonics):
            amp = rng.uniform(0.5, 1.0)
            fx = rng.integers(1, 5)
            fy = rng.uniform(0.0, 2.0)
            phx = rng.uniform(0.0, 2.0 * np.pi)
            phy = rng.uniform(0.0, 2.0 * np.pi)
            img[c] += amp * np.sin(2 * np.pi * fx * x + phx) * np.cos(
                2 * np.pi * fy * y + phy
            )
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.full_like(img, 0.5, dtype=DTYPE)
    return ((img - lo) / (hi - lo)).astype(DTYPE)


def synth_ramp(width: int, height: int) -> np.ndarray:
    """Horizontal ramp: deliberately discontinuous at the wrap."""
    x = (np.arange(width) / (width - 1)).astype(DTYPE)
    return np.broadcast_to(x, (3, height, width)).copy()


SWEEP_HEADER = (
    "corpus_index", "alpha", "omega", "mode",
    "matching_windows", "seam_ratio", "halves_max", "status",
)


def sweep(corpus, alphas, omegas, modes, cfg, include_timing: bool = False):
    """Paired translation runs over (corpus x alpha x omega x mode).

    Returns CSV-ready dict rows in deterministic order.  Invalid combinations
    become rows with a skip reason instead of aborting the sweep.  Timing is
    opt-in so that default output is byte-reproducible.
    """
    from .pipeline import translate

    rows = []
    for idx, img in enumerate(corpus):
        for alpha in alphas:
            for omega in omegas:
                for mode in modes:
                    row = {
                        "corpus_index": idx,
                        "alpha": alpha,
                        "omega": omega,
                        "mode": mode,
                        "matching_windows": "",
                        "seam_ratio": "",
                        "halves_max": "",
                        "status": "ok",
                    }
                    t0 = time.perf_counter()
                    try:
                        run_cfg = cfg.replace(alpha=alpha, omega=omega, mode=mode)
                        out, report = translate(img, run_cfg.target_conditioning(), run_cfg)
                        row["matching_windows"] = count_matching_windows(
                            ExtendSpec(alpha, run_cfg.width, run_cfg.height), omega
                        ).count
                        row["seam_ratio"] = f"{report['seam_ratio']:.6f}"
                        row["halves_max"] = f"{report['halves_max']:.6e}"
                    except PantError as exc:
                        row["status"] = f"skip: {exc}"
                    if include_timing:
                        row["wall_ms"] = f"{(time.perf_counter() - t0) * 1e3:.1f}"
                    rows.append(row)
    return rows


def rows_to_csv(rows, include_timing: bool = False) -> str:
    header = list(SWEEP_HEADER) + (["wall_ms"] if include_timing else [])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in header})
    return buf.getvalue()
