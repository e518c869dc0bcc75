"""Seeded, frozen toy transformer encoder standing in for a ViT backbone.

The encoder is random-initialized and never trained: pruning correctness
and efficiency properties do not depend on learned weights, and real
features can be brought in through the interchange format instead. What
matters here is determinism (every forward pass is a pure function of
frame, config and pass seed), dropout instrumentation on configurable
layers, and a per-token pre-softmax attention-logit tap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import erf

from .errors import DataError, NumericError

# Keeps residual updates small relative to the patch content so that token
# identity survives the full stack (the downstream similarity head relies
# on this).
_RESIDUAL_SCALE = 0.15
_PE_SCALE = 0.25
_LN_EPS = 1e-6


@dataclass(frozen=True)
class EncoderConfig:
    depth: int = 6
    heads: int = 4
    d_v: int = 768
    patch: int = 16
    d_ff: int = 768
    dropout_rate: float = 0.1
    dropout_layers: tuple[int, ...] = (3, 4, 5)  # 1-indexed
    tap_layer: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.d_v % self.heads != 0:
            raise DataError("d_v must be divisible by heads")
        if not set(self.dropout_layers) <= set(range(1, self.depth + 1)):
            raise DataError("dropout_layers must lie in [1, depth]")
        if self.tap_layer not in self.dropout_layers:
            raise DataError("tap_layer must be one of the dropout layers")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DataError("dropout_rate must be in [0, 1)")


@dataclass
class TokenGrid:
    """Per-frame token embeddings with their spatial grid geometry.

    ``source_indices`` is None for a dense grid; a pruned grid carries the
    original token indices so masks can be reconstructed spatially.
    """

    data: np.ndarray  # (n_tokens, d_v) float64
    grid_h: int
    grid_w: int
    frame_index: int = 0
    source_indices: np.ndarray | None = None

    @property
    def n_tokens(self) -> int:
        return self.data.shape[0]

    @property
    def d_v(self) -> int:
        return self.data.shape[1]


def sinusoidal_point(u: float | np.ndarray, v: float | np.ndarray, d: int) -> np.ndarray:
    """Fixed 2-D sinusoidal encoding of normalized coordinates in [0, 1].

    Half the channels encode u, half encode v, each with a geometric
    frequency ladder. Vectorized: u, v may be equal-length arrays.
    """
    if d % 4 != 0:
        raise DataError("positional encoding needs d divisible by 4")
    q = d // 4
    freqs = 1.0 / (10000.0 ** (np.arange(q) / q))  # (q,)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64)) * 100.0
    v = np.atleast_1d(np.asarray(v, dtype=np.float64)) * 100.0
    au = u[:, None] * freqs[None, :]
    av = v[:, None] * freqs[None, :]
    pe = np.concatenate([np.sin(au), np.cos(au), np.sin(av), np.cos(av)], axis=1)
    return _PE_SCALE * np.squeeze(pe)


def grid_positional(grid_h: int, grid_w: int, d: int) -> np.ndarray:
    """Positional encodings at token-cell centers, row-major order."""
    ys, xs = np.meshgrid(np.arange(grid_h), np.arange(grid_w), indexing="ij")
    u = (xs.ravel() + 0.5) / grid_w
    v = (ys.ravel() + 0.5) / grid_h
    return sinusoidal_point(u, v, d).reshape(grid_h * grid_w, d)


class EncoderWeights:
    """Frozen random weights for one EncoderConfig."""

    def __init__(self, config: EncoderConfig):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
        d, f = config.d_v, config.d_ff
        p_in = config.patch * config.patch * 3
        self.w_embed = rng.standard_normal((p_in, d)) / np.sqrt(p_in)
        self.layers = []
        for _ in range(config.depth):
            self.layers.append(
                {
                    "w_qkv": rng.standard_normal((d, 3 * d)) / np.sqrt(d),
                    "w_out": rng.standard_normal((d, d)) * _RESIDUAL_SCALE / np.sqrt(d),
                    "w1": rng.standard_normal((d, f)) / np.sqrt(d),
                    "w2": rng.standard_normal((f, d)) * _RESIDUAL_SCALE / np.sqrt(f),
                }
            )


@lru_cache(maxsize=4)
def encoder_weights(config: EncoderConfig) -> EncoderWeights:
    return EncoderWeights(config)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-based GELU."""
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + _LN_EPS)


def _validate_frame(frame: np.ndarray, config: EncoderConfig) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise DataError("frame must be HxWx3")
    h, w = frame.shape[:2]
    if h % config.patch or w % config.patch:
        raise DataError(f"frame dims {h}x{w} not divisible by patch {config.patch}")
    if frame.min() < 0.0 or frame.max() > 1.0:
        raise DataError("pixel values must lie in [0, 1]")
    return frame


def patchify(frame: np.ndarray, config: EncoderConfig, frame_index: int = 0) -> TokenGrid:
    """Linear projection of non-overlapping patches plus fixed 2-D
    sinusoidal positional encodings. Deterministic given config.seed."""
    frame = _validate_frame(frame, config)
    p = config.patch
    h, w = frame.shape[:2]
    gh, gw = h // p, w // p
    patches = (
        frame.reshape(gh, p, gw, p, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(gh * gw, p * p * 3)
    )
    weights = encoder_weights(config)
    x = (patches - 0.5) @ weights.w_embed
    x += grid_positional(gh, gw, config.d_v)
    return TokenGrid(data=x, grid_h=gh, grid_w=gw, frame_index=frame_index)


def _attention(x, layer, heads):
    """Multi-head self-attention; returns (mixed, pre-softmax logits)."""
    n, d = x.shape
    dh = d // heads
    qkv = x @ layer["w_qkv"]
    q, k, v = qkv[:, :d], qkv[:, d : 2 * d], qkv[:, 2 * d :]
    q = q.reshape(n, heads, dh).transpose(1, 0, 2)
    k = k.reshape(n, heads, dh).transpose(1, 0, 2)
    v = v.reshape(n, heads, dh).transpose(1, 0, 2)
    logits = q @ k.transpose(0, 2, 1) / np.sqrt(dh)  # (heads, n, n)
    m = logits - logits.max(axis=2, keepdims=True)
    probs = np.exp(m)
    probs /= probs.sum(axis=2, keepdims=True)
    mixed = (probs @ v).transpose(1, 0, 2).reshape(n, d)
    return mixed @ layer["w_out"], logits


def _dropout(x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    # Inverted dropout keeps the Monte Carlo mean unbiased.
    mask = rng.random(x.shape) >= rate
    return x * mask / (1.0 - rate)


def _pass_rng(config: EncoderConfig, pass_seed: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed, int(pass_seed)]))
    )


def _run_layers(
    x: np.ndarray,
    config: EncoderConfig,
    first_layer: int,
    rng: np.random.Generator | None,
    tap_sink: list | None = None,
    stop_after_tap: bool = False,
):
    """Run layers first_layer..depth (1-indexed) over token states x.

    When ``stop_after_tap`` is set the walk halts right after the tap
    layer's attention logits are computed; the tap values are identical to
    the full pass since all preceding arithmetic and RNG draws agree.
    """
    weights = encoder_weights(config)
    drop = rng is not None and config.dropout_rate > 0.0
    for idx in range(first_layer, config.depth + 1):
        layer = weights.layers[idx - 1]
        active = drop and idx in config.dropout_layers
        attn_out, logits = _attention(_layer_norm(x), layer, config.heads)
        if tap_sink is not None and idx == config.tap_layer:
            tap_sink.append(logits.mean(axis=(0, 2)))
            if stop_after_tap:
                return None
        if active:
            attn_out = _dropout(attn_out, config.dropout_rate, rng)
        x = x + attn_out
        ff = gelu(_layer_norm(x) @ layer["w1"]) @ layer["w2"]
        if active:
            ff = _dropout(ff, config.dropout_rate, rng)
        x = x + ff
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite activations in encoder forward pass")
    return x


def encode(frame: np.ndarray, config: EncoderConfig, frame_index: int = 0) -> TokenGrid:
    """Deterministic forward pass (dropout disabled)."""
    grid = patchify(frame, config, frame_index)
    out = _run_layers(grid.data, config, 1, rng=None)
    return replace(grid, data=out)


def encode_stochastic(
    frame: np.ndarray,
    config: EncoderConfig,
    pass_seed: int,
    frame_index: int = 0,
) -> tuple[TokenGrid, np.ndarray]:
    """One stochastic pass: inverted dropout with the given pass seed in
    exactly the configured layers. Returns the token grid together with
    the per-token logit tap: the mean over heads and key positions of each
    token's pre-softmax attention row at tap_layer. Reusing a pass seed
    yields identical output by construction."""
    grid = patchify(frame, config, frame_index)
    taps: list[np.ndarray] = []
    out = _run_layers(grid.data, config, 1, rng=_pass_rng(config, pass_seed), tap_sink=taps)
    return replace(grid, data=out), taps[0]


def encode_prefix(frame: np.ndarray, config: EncoderConfig) -> np.ndarray:
    """Token states after the last layer preceding the first dropout layer.

    These layers are deterministic, so the state can be shared across
    stochastic passes.
    """
    grid = patchify(frame, config)
    return _prefix_state(grid.data, config, min(config.dropout_layers))


def _prefix_state(x: np.ndarray, config: EncoderConfig, boundary: int) -> np.ndarray:
    weights = encoder_weights(config)
    for idx in range(1, boundary):
        layer = weights.layers[idx - 1]
        attn_out, _ = _attention(_layer_norm(x), layer, config.heads)
        x = x + attn_out
        x = x + gelu(_layer_norm(x) @ layer["w1"]) @ layer["w2"]
    return x


def tap_from_prefix(
    prefix: np.ndarray, config: EncoderConfig, pass_seed: int
) -> np.ndarray:
    """Logit tap of a stochastic pass, resuming from a shared prefix state
    and stopping right after the tap layer. Bitwise-identical to the tap
    returned by encode_stochastic for the same seed."""
    taps: list[np.ndarray] = []
    _run_layers(
        prefix.copy(),
        config,
        min(config.dropout_layers),
        rng=_pass_rng(config, pass_seed),
        tap_sink=taps,
        stop_after_tap=True,
    )
    return taps[0]


def attention_probs(frame: np.ndarray, config: EncoderConfig, layer_index: int) -> np.ndarray:
    """Post-softmax attention rows (heads, N, N) at the given 1-indexed
    layer of the deterministic pass; diagnostic surface for tests."""
    grid = patchify(frame, config)
    x = _prefix_state(grid.data, config, layer_index)
    weights = encoder_weights(config)
    _, logits = _attention(_layer_norm(x), weights.layers[layer_index - 1], config.heads)
    m = logits - logits.max(axis=2, keepdims=True)
    probs = np.exp(m)
    return probs / probs.sum(axis=2, keepdims=True)
