"""Boundary continuity geometry: extended input, crop-back, window matching.

The extended input splices two copies of the panorama at split point alpha so
that the wrap seam becomes interior content.  Since the splice is a column
permutation with period W, extended column j always holds input column
(j + alpha) mod W; the matching analyzer works directly on that index map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tensors import rotate_columns  # noqa: F401  (re-exported rotation helper)


@dataclass(frozen=True)
class ExtendSpec:
    """Split constant and panorama dimensions, all in image pixels."""

    alpha: int
    width: int
    height: int

    def validate(self) -> None:
        problems = []
        if self.width % 16 != 0:
            problems.append(f"width {self.width} is not a multiple of 16")
        if self.height % 8 != 0:
            problems.append(f"height {self.height} is not a multiple of 8")
        if not 0 < self.alpha <= self.width:
            problems.append(f"alpha {self.alpha} outside (0, {self.width}]")
        if self.alpha % 8 != 0:
            # keeps the splice seam on a latent-cell boundary after 8x downscaling
            problems.append(f"alpha {self.alpha} is not a multiple of 8")
        if problems:
            raise ValidationError(problems)


def extend(img: np.ndarray, spec: ExtendSpec) -> np.ndarray:
    """Splice(I[:, :, alpha:W], I, I[:, :, 0:alpha]) -> width-2W image."""
    spec.validate()
    if img.shape[1] != spec.height or img.shape[2] != spec.width:
        raise ValidationError(
            f"image shape {img.shape} does not match spec "
            f"{spec.height}x{spec.width}"
        )
    return np.concatenate(
        [img[:, :, spec.alpha :], img, img[:, :, : spec.alpha]], axis=2
    )


def crop_back(extended: np.ndarray, spec: ExtendSpec) -> np.ndarray:
    """Recover the width-W panorama: extended[:, :, W-alpha : 2W-alpha]."""
    spec.validate()
    if extended.shape[2] != 2 * spec.width:
        raise ValidationError(
            f"extended width {extended.shape[2]} != 2W = {2 * spec.width}"
        )
    lo = spec.width - spec.alpha
    return extended[:, :, lo : lo + spec.width].copy()


@dataclass(frozen=True)
class MatchReport:
    count: int
    window_ids: tuple


def count_matching_windows(spec: ExtendSpec, omega: int) -> MatchReport:
    """How many schedule windows read an exact unrotated copy of the input.

    A window over the extended image matches when its content equals the
    input column-for-column.  Extended column j holds input column
    (j + alpha) mod W, so a window starting at image column s matches iff
    (s + alpha) mod W == 0; the stitch patch reads circularly from image
    column 2W - W/2 and matches iff alpha == W/2.  Counts are constant
    across denoising steps.
    """
    from .tiler import build_schedule

    spec.validate()
    schedule = build_schedule(spec.width, omega, mode="paper")
    w_img, alpha = spec.width, spec.alpha
    ids = []
    for i, r in enumerate(schedule.regular):
        if (8 * r.start + alpha) % w_img == 0:
            ids.append(f"window@{r.start}")
    stitch_img_start = 8 * schedule.stitch.start
    if (stitch_img_start + alpha) % w_img == 0:
        ids.append("stitch")
    return MatchReport(count=len(ids), window_ids=tuple(ids))
