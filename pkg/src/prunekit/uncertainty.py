"""Monte Carlo dropout uncertainty per token and its token-space features.

T stochastic passes produce per-token attention-logit taps; their
population variance gives the raw uncertainty, whose square root is
min-max normalized across tokens. A ridge fit then maps token embeddings
to normalized uncertainty, and each token's feature row is the normalized
value times that coefficient vector (rank-1 by construction, matching the
3*d_v fusion width downstream).
"""

from __future__ import annotations

from dataclasses import dataclass
from collections.abc import Sequence

import numpy as np

from .encoder import EncoderConfig, TokenGrid, encode_prefix, tap_from_prefix
from .errors import DataError
from .linalg import minmax_normalize, population_variance, ridge_lsq
from .semantic import DEFAULT_RIDGE_LAMBDA


@dataclass
class UncertaintyMap:
    sigma_norm: np.ndarray  # (N,) in [0, 1]
    t_passes: int
    raw_variance: np.ndarray  # (N,) >= 0


@dataclass
class UncertaintyProjection:
    w_u: np.ndarray  # (d_v,)
    lam: float


def uncertainty_from_taps(taps: Sequence[np.ndarray]) -> UncertaintyMap:
    """Reduce per-pass logit taps to normalized per-token uncertainty.

    Variance uses the population (1/T) form; the standard deviation is
    normalized, not the variance (monotonically equivalent under min-max
    anyway). Also serves as the injection seam for hand-built taps.
    """
    var = population_variance(list(taps))
    sigma = np.sqrt(var)
    return UncertaintyMap(
        sigma_norm=minmax_normalize(sigma),
        t_passes=len(taps),
        raw_variance=var,
    )


def mc_uncertainty(
    frame: np.ndarray,
    config: EncoderConfig,
    t_passes: int = 5,
    base_seed: int = 0,
) -> UncertaintyMap:
    """MC-dropout uncertainty from passes seeded base_seed..base_seed+T-1.

    The deterministic layers before the first dropout layer are computed
    once and shared; each pass then resumes from that state and stops at
    the tap layer, which reproduces encode_stochastic's taps bitwise.
    """
    if t_passes < 2:
        raise DataError("mc_uncertainty needs at least 2 passes")
    prefix = encode_prefix(frame, config)
    taps = [
        tap_from_prefix(prefix, config, base_seed + t) for t in range(t_passes)
    ]
    return uncertainty_from_taps(taps)


def fit_uncertainty_projection(
    x_vit: TokenGrid,
    sigma_norm: np.ndarray,
    lam: float = DEFAULT_RIDGE_LAMBDA,
) -> UncertaintyProjection:
    """Ridge coefficients predicting token uncertainty from its embedding."""
    sigma_norm = np.asarray(sigma_norm, dtype=np.float64)
    if sigma_norm.shape != (x_vit.n_tokens,):
        raise DataError(
            f"sigma_norm length {sigma_norm.shape} does not match {x_vit.n_tokens} tokens"
        )
    w = ridge_lsq(x_vit.data, sigma_norm[:, None], lam)
    return UncertaintyProjection(w_u=w[:, 0], lam=lam)


def uncertainty_features(
    sigma_norm: np.ndarray, proj: UncertaintyProjection
) -> np.ndarray:
    """Token-space uncertainty rows U_i = sigma_norm[i] * w_u (N, d_v)."""
    sigma_norm = np.asarray(sigma_norm, dtype=np.float64)
    return np.outer(sigma_norm, proj.w_u)
