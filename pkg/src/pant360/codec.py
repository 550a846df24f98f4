"""Pluggable image <-> latent transforms preserving the 8x spatial factor.

The default BlockAverageCodec is exactly column-local, so boundary-continuity
properties of the rest of the pipeline are provable rather than empirical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tensors import DTYPE

SPATIAL_FACTOR = 8

_LUMA = np.array([0.299, 0.587, 0.114], dtype=DTYPE)


@dataclass(frozen=True)
class CodecDescriptor:
    name: str
    latent_channels: int
    spatial_factor: int = SPATIAL_FACTOR


class BlockAverageCodec:
    """8x8 block means, mapped to a zero-centered 4-channel latent.

    Channels 0-2 are the per-channel block means under v' = 2v - 1; channel 3
    is the block-mean luminance under the same map.  Decode upsamples channels
    0-2 nearest-neighbor, inverts the map, and clamps to [0, 1]; the luminance
    channel is ignored on decode.
    """

    descriptor = CodecDescriptor(name="block-avg", latent_channels=4)

    def encode(self, img: np.ndarray) -> np.ndarray:
        c, h, w = img.shape
        if c != 3:
            raise ValidationError(f"expected 3 channels, got {c}")
        if h % SPATIAL_FACTOR or w % SPATIAL_FACTOR:
            raise ValidationError(
                f"image dims {h}x{w} not divisible by {SPATIAL_FACTOR}"
            )
        hb, wb = h // SPATIAL_FACTOR, w // SPATIAL_FACTOR
        blocks = img.reshape(3, hb, SPATIAL_FACTOR, wb, SPATIAL_FACTOR).mean(
            axis=(2, 4), dtype=DTYPE
        )
        luma = np.einsum("c,chw->hw", _LUMA, blocks).astype(DTYPE)
        lat = np.empty((4, hb, wb), dtype=DTYPE)
        lat[:3] = 2.0 * blocks - 1.0
        lat[3] = 2.0 * luma - 1.0
        return lat

    def decode(self, lat: np.ndarray) -> np.ndarray:
        rgb = (lat[:3] + 1.0) / 2.0
        up = np.repeat(np.repeat(rgb, SPATIAL_FACTOR, axis=1), SPATIAL_FACTOR, axis=2)
        return np.clip(up, 0.0, 1.0).astype(DTYPE)


_CODECS = {"block-avg": BlockAverageCodec}


def make_codec(name: str):
    if name not in _CODECS:
        raise ValidationError(
            f"unknown codec {name!r}; available: {sorted(_CODECS)}"
        )
    return _CODECS[name]()
