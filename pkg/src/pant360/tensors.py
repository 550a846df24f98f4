"""Dense float32 tensors, circular column indexing, and the raw file format.

Images and latents are plain numpy arrays with channel-outermost layout
(channels, height, width).  Columns may wrap circularly; rows never do.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    BadMagicError,
    DimensionOverflowError,
    TruncatedPayloadError,
    ValidationError,
)

DTYPE = np.float32

_MAGIC = b"PANT"
_VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_MAX_ELEMENTS = 1 << 28


@dataclass(frozen=True)
class ColumnRange:
    """A horizontal slab of columns, optionally continuing past the right edge."""

    start: int
    length: int
    wrap: bool = False

    def validate(self, width: int) -> None:
        problems = []
        if not 0 <= self.start < width:
            problems.append(f"start {self.start} outside [0, {width})")
        if self.length < 1:
            problems.append(f"length {self.length} < 1")
        if self.length > width:
            problems.append(f"length {self.length} exceeds width {width}")
        if not self.wrap and self.start + self.length > width:
            problems.append(
                f"range [{self.start}, {self.start + self.length}) exceeds "
                f"width {width} with wrap disabled"
            )
        if problems:
            raise ValidationError(problems)

    def indices(self, width: int) -> np.ndarray:
        return (self.start + np.arange(self.length)) % width

    def with_halo(self, pad: int, width: int) -> "ColumnRange":
        """Widen the range by `pad` columns each side, wrapping as needed."""
        return ColumnRange((self.start - pad) % width, self.length + 2 * pad, wrap=True)

    def covers(self, col: int, width: int) -> bool:
        return ((col - self.start) % width) < self.length


def as_tensor(data, channels: int, height: int, width: int) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=DTYPE).reshape(channels, height, width)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("tensor contains non-finite values")
    return arr


def crop_columns(t: np.ndarray, r: ColumnRange) -> np.ndarray:
    """Return the (possibly circularly wrapped) column slab; source unchanged."""
    width = t.shape[-1]
    r.validate(width)
    if r.start + r.length <= width:
        return t[..., r.start : r.start + r.length].copy()
    return np.take(t, r.indices(width), axis=-1)


def place_columns_accumulate(
    dst: np.ndarray, src: np.ndarray, r: ColumnRange, weights: np.ndarray
) -> None:
    """Add `src` into `dst` at `r` and count +1 coverage in `weights`."""
    width = dst.shape[-1]
    r.validate(width)
    if src.shape[-1] != r.length:
        raise ValidationError(
            f"source width {src.shape[-1]} does not match range length {r.length}"
        )
    if src.shape[:-1] != dst.shape[:-1]:
        raise ValidationError(f"shape mismatch: src {src.shape}, dst {dst.shape}")
    if weights.shape != dst.shape[1:]:
        raise ValidationError(
            f"weights shape {weights.shape} does not match spatial shape {dst.shape[1:]}"
        )
    if r.start + r.length <= width:
        dst[..., r.start : r.start + r.length] += src
        weights[..., r.start : r.start + r.length] += 1.0
    else:
        idx = r.indices(width)
        dst[..., idx] += src
        weights[..., idx] += 1.0


def rotate_columns(t: np.ndarray, k: int) -> np.ndarray:
    """Circular horizontal rotation by k columns (k taken mod width)."""
    return np.roll(t, k % t.shape[-1], axis=-1)


def write_raw(path, t: np.ndarray) -> None:
    arr = np.ascontiguousarray(t, dtype=DTYPE)
    if arr.ndim != 3:
        raise ValidationError(f"expected a 3-d tensor, got shape {arr.shape}")
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, c, h, w))
        fh.write(arr.astype("<f4").tobytes())


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TruncatedPayloadError(f"header truncated at {len(head)} bytes")
        magic, version, c, h, w = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if version != _VERSION:
            raise BadMagicError(f"unsupported version {version}")
        n = c * h * w
        if n == 0 or n > _MAX_ELEMENTS:
            raise DimensionOverflowError(f"dimensions {c}x{h}x{w} out of range")
        payload = fh.read(4 * n)
        if len(payload) < 4 * n:
            raise TruncatedPayloadError(
                f"payload truncated: expected {4 * n} bytes, got {len(payload)}"
            )
    return np.frombuffer(payload, dtype="<f4").astype(DTYPE).reshape(c, h, w)


def write_png(path, img: np.ndarray) -> None:
    """Write a (3, H, W) image in [0, 1] as 8-bit RGB."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValidationError(f"expected a (3, H, W) image, got shape {img.shape}")
    u8 = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(np.transpose(u8, (1, 2, 0)), mode="RGB").save(path, format="PNG")


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=DTYPE)
    return np.ascontiguousarray(np.transpose(rgb, (2, 0, 1)) / DTYPE(255.0))
