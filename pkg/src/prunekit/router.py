"""Token fusion, MLP scoring, top-k retention, and router training.

The fused descriptor per token is [visual ; aligned text ; uncertainty],
width 3*d_v (2304 at the default 768). Scoring runs a two-layer MLP with
an exact erf-based GELU, softmax-normalizes, and keeps the k = ceil(rho*N)
best tokens. The training objective is token-level binary cross-entropy
against mask-overlap labels; a training-free cosine heuristic is available
when no trained weights exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np
from scipy.special import erf

from .encoder import TokenGrid, gelu
from .errors import DataError, NumericError
from .linalg import softmax, top_k


@dataclass(frozen=True)
class PruneConfig:
    retention_ratio: float = 0.30
    k_rule: str = "ceil"  # ceil | floor (floor keeps at least one token)

    def __post_init__(self):
        if not 0.0 < self.retention_ratio <= 1.0:
            raise DataError("retention_ratio must lie in (0, 1]")
        if self.k_rule not in ("ceil", "floor"):
            raise DataError(f"unknown k_rule {self.k_rule!r}")

    def k_for(self, n_tokens: int) -> int:
        if self.k_rule == "floor":
            return max(1, math.floor(self.retention_ratio * n_tokens))
        return math.ceil(self.retention_ratio * n_tokens)


@dataclass
class RouterWeights:
    w1: np.ndarray  # (d_in, d_hidden)
    b1: np.ndarray  # (d_hidden,)
    w2: np.ndarray  # (d_hidden,)
    b2: float

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class RouterTrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 256
    label_overlap_threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0 or self.batch_size <= 0:
            raise DataError("hyperparameters must be positive")


def fuse(
    x_vit: TokenGrid, e_text_aligned: np.ndarray, u_features: np.ndarray
) -> np.ndarray:
    """Row-wise concatenation [visual ; semantic ; uncertainty], (N, 3*d_v)."""
    n, d = x_vit.data.shape
    e_text_aligned = np.asarray(e_text_aligned, dtype=np.float64)
    u_features = np.asarray(u_features, dtype=np.float64)
    if e_text_aligned.shape != (d,):
        raise DataError(f"aligned text must have length {d}")
    if u_features.shape != (n, d):
        raise DataError(f"uncertainty features must be ({n}, {d})")
    text_block = np.broadcast_to(e_text_aligned, (n, d))
    return np.concatenate([x_vit.data, text_block, u_features], axis=1)


def init_router_weights(seed: int = 0, d_in: int = 2304, d_hidden: int = 256) -> RouterWeights:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    lim1 = np.sqrt(6.0 / (d_in + d_hidden))
    lim2 = np.sqrt(6.0 / (d_hidden + 1))
    return RouterWeights(
        w1=rng.uniform(-lim1, lim1, size=(d_in, d_hidden)),
        b1=np.zeros(d_hidden),
        w2=rng.uniform(-lim2, lim2, size=d_hidden),
        b2=0.0,
    )


def raw_scores(fused: np.ndarray, w: RouterWeights) -> np.ndarray:
    """Pre-softmax MLP outputs s_i, one per token."""
    fused = np.asarray(fused, dtype=np.float64)
    if fused.shape[1] != w.d_in:
        raise DataError(f"fused width {fused.shape[1]} != router d_in {w.d_in}")
    s = gelu(fused @ w.w1 + w.b1) @ w.w2 + w.b2
    if not np.all(np.isfinite(s)):
        raise NumericError("non-finite router activations")
    return s


def score(fused: np.ndarray, w: RouterWeights) -> np.ndarray:
    """Softmax-normalized token importance alpha (sums to 1)."""
    return softmax(raw_scores(fused, w))


def prune(
    x_vit: TokenGrid, alpha: np.ndarray, cfg: PruneConfig
) -> tuple[np.ndarray, TokenGrid]:
    """Retain the top-k tokens by alpha, preserving original token order."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (x_vit.n_tokens,):
        raise DataError("alpha length does not match token count")
    k = cfg.k_for(x_vit.n_tokens)
    idx = top_k(alpha, k)
    source = idx if x_vit.source_indices is None else x_vit.source_indices[idx]
    pruned = TokenGrid(
        data=x_vit.data[idx],
        grid_h=x_vit.grid_h,
        grid_w=x_vit.grid_w,
        frame_index=x_vit.frame_index,
        source_indices=source,
    )
    return idx, pruned


def heuristic_score(
    x_vit: TokenGrid,
    e_text_aligned: np.ndarray,
    sigma_norm: np.ndarray,
    beta: float = 0.5,
) -> np.ndarray:
    """Training-free fallback: softmax(cosine(X_i, e'_text) + beta * sigma_i).

    Zero-norm rows on either side contribute cosine 0.
    """
    if beta < 0:
        raise DataError("beta must be nonnegative")
    e = np.asarray(e_text_aligned, dtype=np.float64)
    sig = np.asarray(sigma_norm, dtype=np.float64)
    norms = np.linalg.norm(x_vit.data, axis=1)
    e_norm = np.linalg.norm(e)
    denom = norms * e_norm
    cos = np.zeros(x_vit.n_tokens)
    ok = denom > 0
    cos[ok] = (x_vit.data[ok] @ e) / denom[ok]
    return softmax(cos + beta * sig)


def token_labels(
    mask: np.ndarray, grid_h: int, grid_w: int, threshold: float = 0.5
) -> np.ndarray:
    """Per-token {0,1} labels: 1 iff the token cell's ground-truth overlap
    fraction reaches the threshold."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if h % grid_h or w % grid_w:
        raise DataError("mask dims must tile the token grid")
    ch, cw = h // grid_h, w // grid_w
    frac = mask.reshape(grid_h, ch, grid_w, cw).mean(axis=(1, 3))
    return (frac >= threshold).astype(np.float64).ravel()


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return 0.5 * (1.0 + erf(x / np.sqrt(2.0))) + x * phi


def bce_loss_and_grads(fused, labels, w: RouterWeights):
    """Mean sigmoid BCE over tokens plus analytic gradients."""
    pre = fused @ w.w1 + w.b1
    hid = gelu(pre)
    s = hid @ w.w2 + w.b2
    p = _sigmoid(s)
    eps = 1e-12
    loss = -np.mean(labels * np.log(p + eps) + (1 - labels) * np.log(1 - p + eps))
    m = fused.shape[0]
    ds = (p - labels) / m  # (m,)
    g_w2 = hid.T @ ds
    g_b2 = ds.sum()
    dhid = np.outer(ds, w.w2) * _gelu_grad(pre)
    g_w1 = fused.T @ dhid
    g_b1 = dhid.sum(axis=0)
    return loss, (g_w1, g_b1, g_w2, g_b2)


def train_router(
    dataset: Sequence[tuple[np.ndarray, np.ndarray]],
    cfg: RouterTrainConfig = RouterTrainConfig(),
    init: RouterWeights | None = None,
) -> tuple[RouterWeights, list[float]]:
    """Mini-batch gradient descent on token-level BCE.

    dataset: (fused_tokens, labels) pairs; labels in {0, 1} per token.
    Returns the trained weights and the per-epoch loss trace. Deterministic
    given cfg.seed.
    """
    if not dataset:
        raise DataError("empty training dataset")
    fused = np.concatenate([np.asarray(f, dtype=np.float64) for f, _ in dataset])
    labels = np.concatenate([np.asarray(l, dtype=np.float64) for _, l in dataset])
    if fused.shape[0] != labels.shape[0]:
        raise DataError("fused rows and labels differ in length")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be binary")

    w = init or init_router_weights(cfg.seed, d_in=fused.shape[1])
    w1, b1, w2, b2 = w.w1.copy(), w.b1.copy(), w.w2.copy(), float(w.b2)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 1])))
    losses: list[float] = []
    m = fused.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            cur = RouterWeights(w1, b1, w2, b2)
            loss, (g_w1, g_b1, g_w2, g_b2) = bce_loss_and_grads(
                fused[batch], labels[batch], cur
            )
            if not np.isfinite(loss):
                raise NumericError("router training diverged (non-finite loss)")
            w1 = w1 - cfg.learning_rate * g_w1
            b1 = b1 - cfg.learning_rate * g_b1
            w2 = w2 - cfg.learning_rate * g_w2
            b2 = b2 - cfg.learning_rate * g_b2
        epoch_loss, _ = bce_loss_and_grads(fused, labels, RouterWeights(w1, b1, w2, b2))
        losses.append(float(epoch_loss))
    return RouterWeights(w1, b1, w2, b2), losses


def save_router_weights(path, weights: RouterWeights) -> None:
    """Flat container [w1; b1; w2; b2] plus a JSON sidecar (path + .json)
    recording the layer sizes."""
    from pathlib import Path

    from .container import write_container, write_manifest

    flat = np.concatenate(
        [weights.w1.ravel(), weights.b1, weights.w2, [weights.b2]]
    )
    write_container(path, flat.reshape(-1))
    d_in, d_hidden = weights.w1.shape
    write_manifest(str(path) + ".json", {"d_in": d_in, "d_hidden": d_hidden})


def load_router_weights(path) -> RouterWeights:
    from .container import read_container, read_manifest

    sidecar = read_manifest(str(path) + ".json")
    d_in, d_hidden = int(sidecar["d_in"]), int(sidecar["d_hidden"])
    flat = read_container(path)
    expected = d_in * d_hidden + 2 * d_hidden + 1
    if flat.ndim != 1 or flat.size != expected:
        raise DataError(f"{path}: expected {expected} weight values, got {flat.size}")
    pos = d_in * d_hidden
    w1 = flat[:pos].reshape(d_in, d_hidden)
    b1 = flat[pos : pos + d_hidden]
    w2 = flat[pos + d_hidden : pos + 2 * d_hidden]
    b2 = float(flat[-1])
    return RouterWeights(w1=w1, b1=b1, w2=w2, b2=b2)
