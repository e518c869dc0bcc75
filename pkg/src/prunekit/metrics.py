"""Region (Jaccard) and contour (boundary-F) quality measures.

Conventions: Jaccard of two empty masks is 1 and of exactly one empty
mask is 0. Boundary pixels are 4-connected (a foreground pixel with a
background 4-neighbor or on the image border). A boundary pixel matches
when it lies within Euclidean distance tol of any pixel of the opposite
boundary; tol defaults to 0.8% of the image diagonal, rounded up.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import DataError


def _as_mask(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise DataError(f"{name} must be a 2-D binary map")
    return a.astype(bool)


def _check_dims(s: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s, g = _as_mask(s, "S"), _as_mask(g, "G")
    if s.shape != g.shape:
        raise DataError(f"mask shape mismatch: {s.shape} vs {g.shape}")
    return s, g


def jaccard(s: np.ndarray, g: np.ndarray) -> float:
    s, g = _check_dims(s, g)
    union = np.logical_or(s, g).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(s, g).sum() / union)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """4-connected boundary: foreground pixels adjacent to background or
    lying on the image border."""
    mask = _as_mask(mask, "mask")
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def default_boundary_tol(shape: tuple[int, int]) -> int:
    return math.ceil(0.008 * math.hypot(*shape))


def boundary_f(s: np.ndarray, g: np.ndarray, tol: float | None = None) -> float:
    """Boundary F-measure 2PR/(P+R) with distance tolerance tol."""
    s, g = _check_dims(s, g)
    if tol is None:
        tol = default_boundary_tol(s.shape)
    if tol < 0:
        raise DataError("tolerance must be nonnegative")
    sb, gb = boundary_pixels(s), boundary_pixels(g)
    ns, ng = sb.sum(), gb.sum()
    if ns == 0 and ng == 0:
        return 1.0
    if ns == 0 or ng == 0:
        return 0.0
    # Distance of every pixel to the nearest opposite-boundary pixel.
    dist_to_g = distance_transform_edt(~gb)
    dist_to_s = distance_transform_edt(~sb)
    precision = float((dist_to_g[sb] <= tol).mean())
    recall = float((dist_to_s[gb] <= tol).mean())
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def jf_frame(s: np.ndarray, g: np.ndarray, tol: float | None = None) -> float:
    return 0.5 * (jaccard(s, g) + boundary_f(s, g, tol))


def jf_score(
    predictions: list[np.ndarray],
    ground_truth: list[np.ndarray],
    tol: float | None = None,
) -> dict:
    """Per-frame J, F and J&F plus sequence means ((J+F)/2 per frame,
    averaged over frames)."""
    if not predictions or len(predictions) != len(ground_truth):
        raise DataError("prediction and ground-truth lists must align and be non-empty")
    per_j = [jaccard(s, g) for s, g in zip(predictions, ground_truth)]
    per_f = [boundary_f(s, g, tol) for s, g in zip(predictions, ground_truth)]
    per_jf = [0.5 * (j + f) for j, f in zip(per_j, per_f)]
    return {
        "per_frame_J": per_j,
        "per_frame_F": per_f,
        "per_frame_JF": per_jf,
        "mean_J": float(np.mean(per_j)),
        "mean_F": float(np.mean(per_f)),
        "mean_JF": float(np.mean(per_jf)),
    }
