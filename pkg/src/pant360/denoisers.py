"""Noise-prediction operators, conditioning, and control payload channels.

Every built-in denoiser is deterministic and shape-preserving.  The toy
convolutional denoiser emits intermediate features and a per-cell channel
attention map as payloads, and can consume injected replacements for either;
this is the hook the spatial-control machinery drives.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import InjectionError, ValidationError
from .tensors import DTYPE

EMBED_DIM = 8
FEATURE_SITE = "feat.l1"
ATTENTION_SITE = "attn.l1"


@dataclass(frozen=True)
class Conditioning:
    kind: str
    embedding: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, Conditioning):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.embedding, other.embedding)

    def __hash__(self):
        return hash((self.kind, self.embedding.tobytes()))


def null_conditioning() -> Conditioning:
    return Conditioning(kind="null", embedding=np.zeros(EMBED_DIM, dtype=DTYPE))


def prompt_conditioning(text: str) -> Conditioning:
    """Map a prompt string to a reproducible pseudo-random embedding."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(EMBED_DIM).astype(DTYPE)
    return Conditioning(kind="prompt", embedding=vec)


class Denoiser(ABC):
    """Deterministic eps-predictor; identical inputs give identical outputs."""

    @abstractmethod
    def predict(self, x, t: int, cond: Conditioning, injected=None):
        """Return (eps, emitted_payloads) with eps.shape == x.shape."""


class ZeroEpsDenoiser(Denoiser):
    """Always predicts eps = 0; the analytic round-trip fixture."""

    def predict(self, x, t, cond, injected=None):
        return np.zeros_like(x, dtype=DTYPE), {}


class LinearGaussianDenoiser(Denoiser):
    """Optimal eps for x0 ~ N(m, v*I) under the DDIM forward model.

    eps(x_t, t) = (x_t - sqrt(abar_t) * m) * sqrt(1 - abar_t) / (abar_t * v + 1 - abar_t)

    Prompt conditioning shifts the mean by a fixed per-prompt offset so that
    distinct prompts observably change the output.
    """

    def __init__(self, schedule, mean: float = 0.0, var: float = 1.0,
                 prompt_gain: float = 0.25):
        if var <= 0:
            raise ValidationError(f"variance {var} must be positive")
        self.schedule = schedule
        self.mean = float(mean)
        self.var = float(var)
        self.prompt_gain = float(prompt_gain)

    def _mean_for(self, cond: Conditioning) -> float:
        if cond.kind == "null":
            return self.mean
        return self.mean + self.prompt_gain * float(np.mean(cond.embedding))

    def predict(self, x, t, cond, injected=None):
        abar = float(self.schedule.alpha_bar[t])
        m = self._mean_for(cond)
        scale = np.sqrt(1.0 - abar) / (abar * self.var + 1.0 - abar)
        eps = (x - DTYPE(np.sqrt(abar) * m)) * DTYPE(scale)
        return eps.astype(DTYPE), {}


def _conv3x3(x, kernel, wrap_cols: bool):
    """Channel-mixing 3x3 convolution; rows edge-padded, columns wrap or zero."""
    xp = np.pad(x, ((0, 0), (1, 1), (0, 0)), mode="edge")
    xp = np.pad(xp, ((0, 0), (0, 0), (1, 1)), mode="wrap" if wrap_cols else "constant")
    return _conv_valid(xp, kernel)


def _conv_valid(xp, kernel):
    """3x3 convolution consuming pre-padded rows and columns."""
    h, w = xp.shape[1] - 2, xp.shape[2] - 2
    out = np.zeros((kernel.shape[0], h, w), dtype=DTYPE)
    for dy in range(3):
        for dx in range(3):
            out += np.einsum(
                "oi,ihw->ohw", kernel[:, :, dy, dx], xp[:, dy : dy + h, dx : dx + w]
            )
    return out


def _box4(f, wrap_cols: bool):
    """4x4 sliding box mean; rows clamped, columns wrap or zero (stride 1)."""
    fp = np.pad(f, ((0, 0), (1, 2), (0, 0)), mode="edge")
    fp = np.pad(fp, ((0, 0), (0, 0), (1, 2)), mode="wrap" if wrap_cols else "constant")
    h, w = f.shape[1], f.shape[2]
    out = np.zeros_like(f, dtype=DTYPE)
    for dy in range(4):
        for dx in range(4):
            out += fp[:, dy : dy + h, dx : dx + w]
    return out / DTYPE(16.0)


class ConvToyDenoiser(Denoiser):
    """Two-stage circular convolutional fixture with feature/attention payloads.

    Stage 1 computes a feature map f with a seeded 3x3 convolution; a 4x4
    box-pooled per-cell channel gram of f gives a row-softmax attention map A.
    Stage 2 mixes (f + conditioning bias) through A and convolves again to get
    eps.  Columns wrap circularly by default (`wrap_columns=False` yields the
    wrap-blind twin that stands in for ordinary-image networks); rows clamp.

    Injected payloads replace f and/or A.  A payload one column wider on each
    side (a halo) makes the stage-2 convolution read the true neighbours of a
    window crop, so windowed injection reproduces full-latent computation
    exactly.
    """

    def __init__(self, seed: int, channels: int = 4, wrap_columns: bool = True,
                 kernel_scale: float = 0.1, cond_gain: float = 0.5):
        rng = np.random.default_rng(seed)
        self.channels = channels
        self.wrap_columns = wrap_columns
        self.k1 = (kernel_scale * rng.standard_normal((channels, channels, 3, 3))).astype(DTYPE)
        self.k2 = (kernel_scale * rng.standard_normal((channels, channels, 3, 3))).astype(DTYPE)
        self.cond_proj = (cond_gain * rng.standard_normal((channels, EMBED_DIM))).astype(DTYPE)

    def _bias(self, cond: Conditioning):
        return (self.cond_proj @ cond.embedding).astype(DTYPE)

    def _attention(self, f):
        g = _box4(f, self.wrap_columns)
        scores = np.einsum("ihw,jhw->ijhw", g, g)
        scores = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(scores, dtype=DTYPE)
        return e / e.sum(axis=1, keepdims=True)

    def _check_feat(self, f, h, w):
        if f.shape not in ((self.channels, h, w), (self.channels, h, w + 2)):
            raise InjectionError(
                FEATURE_SITE,
                f"expected shape {(self.channels, h, w)} or halo width {w + 2}, "
                f"got {f.shape}",
            )

    def _check_attn(self, a, h, wf):
        if a.shape != (self.channels, self.channels, h, wf):
            raise InjectionError(
                ATTENTION_SITE,
                f"expected shape {(self.channels, self.channels, h, wf)}, got {a.shape}",
            )

    def predict(self, x, t, cond, injected=None):
        h, w = x.shape[1], x.shape[2]
        injected = injected or {}
        emitted = {}

        f_inj = injected.get(FEATURE_SITE)
        if f_inj is not None:
            self._check_feat(f_inj, h, w)
            f = np.asarray(f_inj, dtype=DTYPE)
        else:
            f = _conv3x3(x, self.k1, self.wrap_columns)

        a_inj = injected.get(ATTENTION_SITE)
        if a_inj is not None:
            self._check_attn(a_inj, h, f.shape[2])
            attn = np.asarray(a_inj, dtype=DTYPE)
        else:
            attn = self._attention(f)

        mixed = np.einsum("ijhw,jhw->ihw", attn, f + self._bias(cond)[:, None, None])
        mixed = mixed.astype(DTYPE)
        if mixed.shape[2] == w + 2:
            # halo provided: rows still need clamping, columns are exact
            mp = np.pad(mixed, ((0, 0), (1, 1), (0, 0)), mode="edge")
            eps = _conv_valid(mp, self.k2)
        else:
            eps = _conv3x3(mixed, self.k2, self.wrap_columns)

        if not injected:
            emitted = {FEATURE_SITE: f, ATTENTION_SITE: attn}
        return eps, emitted


def make_denoiser(name: str, schedule=None, seed: int = 0, mean: float = 0.0,
                  var: float = 1.0, wrap_columns: bool = True) -> Denoiser:
    if name == "zero":
        return ZeroEpsDenoiser()
    if name == "linear-gauss":
        if schedule is None:
            raise ValidationError("linear-gauss denoiser requires a noise schedule")
        return LinearGaussianDenoiser(schedule, mean=mean, var=var)
    if name == "conv-toy":
        return ConvToyDenoiser(seed=seed, wrap_columns=wrap_columns)
    if name == "conv-toy-flat":
        # Zero-padded columns: mimics denoisers that are blind to the
        # horizontal wrap, the regime where boundary seams actually occur.
        return ConvToyDenoiser(seed=seed, wrap_columns=False)
    raise ValidationError(
        f"unknown denoiser {name!r}; "
        "available: zero, linear-gauss, conv-toy, conv-toy-flat"
    )
