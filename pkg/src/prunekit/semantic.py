"""Text-prompt embeddings and the training-free semantic alignment map.

Embeddings come either from an external HTTP provider (POST /embed) or
from a deterministic offline embedder that hashes the normalized prompt
text into a seeded unit vector, which keeps the test suite network-free.

The alignment solves the broadcast least-squares problem

    W_t = argmin_W || X_vit W - 1_N e_text^T ||_F^2 + lam ||W||_F^2

with W in R^{d_v x d_t}; the aligned prompt is the transpose map applied
to e_text, which lands in the visual-token width d_v.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .encoder import TokenGrid
from .errors import DataError
from .linalg import ridge_lsq

DEFAULT_D_T = 512
DEFAULT_RIDGE_LAMBDA = 1e-3


@dataclass(frozen=True)
class EmbedConfig:
    offline: bool = True
    embed_seed: int = 7
    url: str | None = field(
        default_factory=lambda: os.environ.get("PRUNEKIT_EMBED_URL")
    )
    d_t: int = DEFAULT_D_T
    timeout: float = 10.0
    retries: int = 2


@dataclass
class TextEmbedding:
    data: np.ndarray  # (d_t,)
    unit_norm: bool = True

    @property
    def d_t(self) -> int:
        return self.data.shape[0]


@dataclass
class SemanticProjection:
    w_t: np.ndarray  # (d_v, d_t)
    lam: float
    fit_frame_index: int = 0


def normalize_prompt(text: str) -> str:
    norm = " ".join(text.lower().split())
    if not norm:
        raise DataError("prompt is empty after whitespace trimming")
    return norm


def embed_text(text: str, cfg: EmbedConfig = EmbedConfig()) -> TextEmbedding:
    """Embed a prompt, offline (seeded hash of the normalized text) or via
    the configured provider endpoint."""
    norm = normalize_prompt(text)
    if cfg.offline:
        digest = hashlib.sha256(f"{cfg.embed_seed}:{norm}".encode()).digest()
        seed = np.random.SeedSequence(list(digest))
        rng = np.random.Generator(np.random.PCG64(seed))
        vec = rng.standard_normal(cfg.d_t)
        return TextEmbedding(data=vec / np.linalg.norm(vec))
    return _provider_embed(norm, cfg)


def _provider_embed(text: str, cfg: EmbedConfig) -> TextEmbedding:
    import requests

    if not cfg.url:
        raise DataError("no provider URL configured and offline mode disabled")
    endpoint = cfg.url.rstrip("/") + "/embed"
    last_exc: Exception | None = None
    for attempt in range(cfg.retries + 1):
        try:
            resp = requests.post(endpoint, json={"text": text}, timeout=cfg.timeout)
            resp.raise_for_status()
            payload = resp.json()
            vec = np.asarray(payload["embedding"], dtype=np.float64)
            if vec.shape != (cfg.d_t,):
                raise DataError(
                    f"provider returned width {vec.shape}, expected ({cfg.d_t},)"
                )
            return TextEmbedding(data=vec, unit_norm=bool(
                abs(np.linalg.norm(vec) - 1.0) <= 1e-6
            ))
        except DataError:
            raise
        except Exception as exc:  # noqa: BLE001 - retried, then surfaced
            last_exc = exc
            if attempt < cfg.retries:
                time.sleep(0.1 * (attempt + 1))
    raise DataError(f"embedding provider failed after {cfg.retries + 1} attempts: {last_exc}")


def fit_text_projection(
    x_vit: TokenGrid,
    e_text: TextEmbedding,
    lam: float = DEFAULT_RIDGE_LAMBDA,
) -> SemanticProjection:
    """Fit the broadcast ridge map sending every token of the fit frame
    near e_text; computed once per video on the first frame's tokens."""
    targets = np.ones((x_vit.n_tokens, 1)) * e_text.data[None, :]
    w_t = ridge_lsq(x_vit.data, targets, lam)
    return SemanticProjection(w_t=w_t, lam=lam, fit_frame_index=x_vit.frame_index)


def align_text(proj: SemanticProjection, e_text: TextEmbedding) -> np.ndarray:
    """Aligned prompt vector in visual-token space (length d_v)."""
    if proj.w_t.shape[1] != e_text.d_t:
        raise DataError(
            f"projection expects d_t={proj.w_t.shape[1]}, embedding has {e_text.d_t}"
        )
    return proj.w_t @ e_text.data
