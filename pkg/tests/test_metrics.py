import math

import numpy as np
import pytest
from scipy.ndimage import distance_transform_edt

from prunekit.errors import DataError
from prunekit.metrics import (
    boundary_f,
    boundary_pixels,
    default_boundary_tol,
    jaccard,
    jf_frame,
    jf_score,
)


def box(h, w, y0, y1, x0, x1):
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1, x0:x1] = True
    return m


def test_jaccard_one_third_overlap():
    # 10x10 squares offset so intersection=50, union=150.
    a = box(32, 32, 0, 10, 0, 10)
    b = box(32, 32, 0, 10, 5, 15)
    assert jaccard(a, b) == pytest.approx(50 / 150)


def test_jaccard_empty_conventions():
    empty = np.zeros((8, 8), dtype=bool)
    full = box(8, 8, 0, 4, 0, 4)
    assert jaccard(empty, empty) == 1.0
    assert jaccard(empty, full) == 0.0
    assert jaccard(full, empty) == 0.0


def test_jaccard_shape_mismatch():
    with pytest.raises(DataError):
        jaccard(np.zeros((4, 4), dtype=bool), np.zeros((4, 5), dtype=bool))


def test_boundary_pixels_of_square():
    m = box(16, 16, 4, 10, 4, 10)
    b = boundary_pixels(m)
    # ring of the 6x6 square: 6*6 - 4*4 interior
    assert b.sum() == 36 - 16
    assert not b[5, 5]
    assert b[4, 4]


def test_boundary_pixels_touching_border():
    m = box(8, 8, 0, 3, 0, 3)
    b = boundary_pixels(m)
    assert b[0, 0]  # border pixels count as boundary


def test_default_tolerance_formula():
    assert default_boundary_tol((480, 854)) == math.ceil(0.008 * math.hypot(480, 854))


def test_boundary_f_identical_is_one():
    m = box(32, 32, 8, 20, 8, 20)
    assert boundary_f(m, m) == 1.0
    assert jf_frame(m, m) == 1.0


def test_boundary_f_empty_conventions():
    empty = np.zeros((16, 16), dtype=bool)
    full = box(16, 16, 2, 8, 2, 8)
    assert boundary_f(empty, empty) == 1.0
    assert boundary_f(empty, full) == 0.0
    assert boundary_f(full, empty) == 0.0


def test_boundary_f_shift_within_tolerance():
    # 1px shift on a 64x64 grid, default tol = ceil(0.008*90.5) = 1.
    g = box(64, 64, 20, 40, 20, 40)
    s = box(64, 64, 21, 41, 20, 40)
    assert boundary_f(s, g) == 1.0
    # 5px shift is well outside tolerance: F drops strictly below 1.
    far = box(64, 64, 25, 45, 20, 40)
    assert boundary_f(far, g) < 1.0


def test_boundary_f_matches_bruteforce_on_random_masks():
    """Oracle: per-pixel nearest-boundary distances computed by explicit
    pairwise search on 32x32 masks."""
    rng = np.random.Generator(np.random.PCG64(7))
    for trial in range(5):
        s = rng.random((32, 32)) < 0.4
        g = rng.random((32, 32)) < 0.4
        tol = 2.0
        sb, gb = boundary_pixels(s), boundary_pixels(g)
        if sb.sum() == 0 or gb.sum() == 0:
            continue
        sp = np.argwhere(sb).astype(float)
        gp = np.argwhere(gb).astype(float)
        d_sg = np.sqrt(((sp[:, None, :] - gp[None, :, :]) ** 2).sum(-1)).min(axis=1)
        d_gs = np.sqrt(((gp[:, None, :] - sp[None, :, :]) ** 2).sum(-1)).min(axis=1)
        precision = (d_sg <= tol).mean()
        recall = (d_gs <= tol).mean()
        expected = (
            0.0
            if precision + recall == 0
            else 2 * precision * recall / (precision + recall)
        )
        assert boundary_f(s, g, tol=tol) == pytest.approx(expected, abs=1e-12)


def test_boundary_f_rejects_negative_tolerance():
    m = box(8, 8, 2, 5, 2, 5)
    with pytest.raises(DataError):
        boundary_f(m, m, tol=-1)


def test_jf_score_aggregates_per_frame():
    a = box(32, 32, 0, 10, 0, 10)
    b = box(32, 32, 0, 10, 5, 15)
    out = jf_score([a, a], [a, b])
    assert out["per_frame_J"] == [1.0, pytest.approx(50 / 150)]
    assert out["mean_JF"] == pytest.approx(np.mean(out["per_frame_JF"]))
    assert len(out["per_frame_F"]) == 2


def test_jf_score_validates_lists():
    a = box(8, 8, 0, 4, 0, 4)
    with pytest.raises(DataError):
        jf_score([a], [a, a])
    with pytest.raises(DataError):
        jf_score([], [])


def test_numeric_masks_coerced_and_wrong_rank_rejected():
    a = box(8, 8, 0, 4, 0, 4)
    assert jaccard(a.astype(float), a) == 1.0
    with pytest.raises(DataError):
        jaccard(np.zeros(16, dtype=bool), np.zeros((4, 4), dtype=bool))
