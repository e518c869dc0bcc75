"""Dense linear-algebra primitives the rest of the pipeline builds on.

Everything here is pure, operates on float64 numpy arrays, and validates
its inputs up front. 64-bit arithmetic is deliberate: it removes floating
precision as a variable when comparing against independent oracles.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import scipy.linalg

from .errors import DataError, NumericError


def _check_finite(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite values")
    return a


def ridge_lsq(a: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Solve min_W ||A W - B||_F^2 + lam ||W||_F^2 in closed form.

    Uses the normal equations (A^T A + lam I) W = A^T B through a Cholesky
    factorization. When lam > 0 and A has fewer rows than columns the
    algebraically equivalent dual form W = A^T (A A^T + lam I)^{-1} B is
    used instead, which factorizes the smaller Gram matrix.

    lam = 0 is accepted only when A^T A is nonsingular; a failed
    factorization raises NumericError.
    """
    a = _check_finite(a, "A")
    b = _check_finite(b, "B")
    if a.ndim != 2 or b.ndim != 2:
        raise DataError("ridge_lsq expects 2-D operands")
    if a.shape[0] != b.shape[0]:
        raise DataError(
            f"row-count mismatch: A has {a.shape[0]} rows, B has {b.shape[0]}"
        )
    if not np.isfinite(lam) or lam < 0:
        raise DataError("lambda must be a finite nonnegative scalar")

    n, p = a.shape
    try:
        if lam > 0 and n < p:
            gram = a @ a.T
            gram[np.diag_indices_from(gram)] += lam
            c = scipy.linalg.cho_factor(gram, lower=True)
            return a.T @ scipy.linalg.cho_solve(c, b)
        gram = a.T @ a
        if lam > 0:
            gram[np.diag_indices_from(gram)] += lam
        c = scipy.linalg.cho_factor(gram, lower=True)
        return scipy.linalg.cho_solve(c, a.T @ b)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"normal-equation factorization failed: {exc}") from exc


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction); preserves order."""
    v = _check_finite(v, "v")
    if v.size == 0:
        raise DataError("softmax of an empty vector")
    e = np.exp(v - np.max(v))
    return e / e.sum()


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken toward the smaller
    index, returned sorted ascending by index."""
    scores = _check_finite(scores, "scores")
    if scores.ndim != 1:
        raise DataError("scores must be 1-D")
    if not 1 <= k <= scores.size:
        raise DataError(f"k={k} out of range for {scores.size} scores")
    # Stable argsort on negated scores keeps the smaller index first on ties.
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def minmax_normalize(v: np.ndarray) -> np.ndarray:
    """Affine rescale of v into [0, 1]; constant input maps to all zeros."""
    v = _check_finite(v, "v")
    if v.size == 0:
        raise DataError("minmax_normalize of an empty vector")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def population_variance(samples: Sequence[np.ndarray]) -> np.ndarray:
    """Per-index variance over a collection of equal-length vectors,
    with divisor T (population form)."""
    if len(samples) < 2:
        raise DataError("population_variance needs at least 2 samples")
    arrs = [_check_finite(s, "sample") for s in samples]
    length = arrs[0].shape
    if any(s.shape != length for s in arrs):
        raise DataError("samples must share a common length")
    stacked = np.stack(arrs)
    # Shift by the first sample: variance is shift-invariant, and this makes
    # identical samples yield exactly zero (no 1-ulp mean-rounding residue).
    shifted = stacked - stacked[0]
    return shifted.var(axis=0)  # numpy default ddof=0 is the population form
