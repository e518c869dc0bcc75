import numpy as np
import pytest

from prunekit.encoder import TokenGrid
from prunekit.errors import DataError
from prunekit.router import (
    PruneConfig,
    RouterTrainConfig,
    RouterWeights,
    bce_loss_and_grads,
    fuse,
    heuristic_score,
    init_router_weights,
    load_router_weights,
    prune,
    raw_scores,
    save_router_weights,
    score,
    token_labels,
    train_router,
)


def small_weights(seed=0, d_in=20, d_hidden=6):
    return init_router_weights(seed, d_in=d_in, d_hidden=d_hidden)


def grid_of(n=49, d=768, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    side = int(np.sqrt(n))
    return TokenGrid(data=rng.standard_normal((n, d)), grid_h=side, grid_w=side)


def test_retention_counts():
    assert PruneConfig(0.30).k_for(196) == 59
    assert PruneConfig(0.50).k_for(196) == 98
    assert PruneConfig(0.10).k_for(196) == 20
    assert PruneConfig(1.00).k_for(196) == 196
    assert PruneConfig(0.30, k_rule="floor").k_for(196) == 58


def test_prune_config_validation():
    with pytest.raises(DataError):
        PruneConfig(0.0)
    with pytest.raises(DataError):
        PruneConfig(1.2)
    with pytest.raises(DataError):
        PruneConfig(0.3, k_rule="round")


def test_fuse_width_and_layout():
    grid = grid_of()
    e_aligned = np.arange(768.0)
    u = np.ones((49, 768))
    fused = fuse(grid, e_aligned, u)
    assert fused.shape == (49, 2304)
    np.testing.assert_array_equal(fused[:, :768], grid.data)
    # middle block is the same aligned text vector in every row
    assert np.all(fused[:, 768:1536] == e_aligned[None, :])
    np.testing.assert_array_equal(fused[:, 1536:], u)


def test_init_bounds_match_uniform_fan_rule():
    w = init_router_weights(0)
    limit1 = np.sqrt(6.0 / (2304 + 256))
    limit2 = np.sqrt(6.0 / (256 + 1))
    assert np.abs(w.w1).max() <= limit1
    assert np.abs(w.w2).max() <= limit2
    np.testing.assert_array_equal(w.b1, np.zeros(256))
    assert w.b2 == 0.0


def test_score_is_softmax_over_frame():
    rng = np.random.Generator(np.random.PCG64(0))
    fused = rng.standard_normal((10, 20))
    w = small_weights()
    alpha = score(fused, w)
    assert alpha.shape == (10,)
    assert np.isclose(alpha.sum(), 1.0)
    assert np.all(alpha > 0)


def test_prune_returns_sorted_indices_and_subgrid():
    grid = grid_of()
    rng = np.random.Generator(np.random.PCG64(1))
    alpha = rng.random(49)
    idx, pruned = prune(grid, alpha, PruneConfig(0.30))
    assert len(idx) == 15
    assert np.all(np.diff(idx) > 0)
    np.testing.assert_array_equal(pruned.data, grid.data[idx])
    np.testing.assert_array_equal(pruned.source_indices, idx)


def test_prune_composes_source_indices():
    grid = grid_of()
    alpha = np.linspace(1, 0, 49)
    idx1, once = prune(grid, alpha, PruneConfig(0.5))
    idx2, twice = prune(once, np.linspace(1, 0, once.n_tokens), PruneConfig(0.5))
    np.testing.assert_array_equal(twice.source_indices, idx1[idx2])


def test_router_gradients_match_finite_differences():
    """Analytic BCE gradients vs central differences, 5 coords x 10 instances."""
    rng = np.random.Generator(np.random.PCG64(42))
    eps = 1e-6
    for instance in range(10):
        d_in, d_hidden, n = 12, 5, 8
        w = init_router_weights(instance, d_in=d_in, d_hidden=d_hidden)
        fused = rng.standard_normal((n, d_in))
        labels = rng.integers(0, 2, n).astype(float)
        _, (g_w1, g_b1, g_w2, _) = bce_loss_and_grads(fused, labels, w)
        flats = {
            "w1": (w.w1, g_w1),
            "b1": (w.b1, g_b1),
            "w2": (w.w2, g_w2),
        }
        for _ in range(5):
            name = rng.choice(list(flats))
            param, grad = flats[name]
            coord = tuple(rng.integers(0, s) for s in param.shape)
            orig = param[coord]
            param[coord] = orig + eps
            up, _ = bce_loss_and_grads(fused, labels, w)
            param[coord] = orig - eps
            down, _ = bce_loss_and_grads(fused, labels, w)
            param[coord] = orig
            fd = (up - down) / (2 * eps)
            denom = max(abs(fd), abs(grad[coord]), 1e-8)
            assert abs(fd - grad[coord]) / denom <= 1e-4


def test_training_decreases_loss():
    rng = np.random.Generator(np.random.PCG64(9))
    d_in = 10
    fused = rng.standard_normal((200, d_in))
    truth = (fused[:, 0] + 0.3 * fused[:, 1] > 0).astype(float)
    cfg = RouterTrainConfig(epochs=150, learning_rate=5e-2, seed=0)
    w, losses = train_router(
        [(fused, truth)], cfg, init_router_weights(0, d_in=d_in, d_hidden=8)
    )
    assert losses[-1] < losses[0] * 0.5


def test_training_validates_labels():
    fused = np.zeros((4, 6))
    with pytest.raises(DataError):
        train_router(
            [(fused, np.array([0.0, 0.5, 1.0, 1.0]))],
            RouterTrainConfig(epochs=1),
            init_router_weights(0, d_in=6, d_hidden=3),
        )


def test_heuristic_score_uses_uncertainty_tiebreak():
    grid = grid_of(n=4, d=8, seed=3)
    e = grid.data[2] * 5.0  # token 2 aligns perfectly
    sigma = np.zeros(4)
    alpha = heuristic_score(grid, e, sigma, beta=0.5)
    assert np.argmax(alpha) == 2
    sigma2 = np.array([1.0, 0.0, 0.0, 0.0])
    alpha2 = heuristic_score(grid, e, sigma2, beta=0.5)
    assert alpha2[0] > alpha[0]


def test_token_labels_overlap_threshold():
    mask = np.zeros((32, 32), dtype=bool)
    mask[0:16, 0:8] = True  # covers half of cell (0,0) of a 2x2 grid of 16px cells
    labels = token_labels(mask, 2, 2, threshold=0.5)
    np.testing.assert_array_equal(labels, [1.0, 0.0, 0.0, 0.0])
    labels_strict = token_labels(mask, 2, 2, threshold=0.51)
    np.testing.assert_array_equal(labels_strict, [0.0, 0.0, 0.0, 0.0])


def test_weights_roundtrip_identical_scores(tmp_path):
    rng = np.random.Generator(np.random.PCG64(5))
    w = init_router_weights(3)
    path = tmp_path / "router.tpk"
    save_router_weights(path, w)
    back = load_router_weights(path)
    fused = rng.standard_normal((7, 2304))
    # container stores float32; scores agree to that precision
    np.testing.assert_allclose(
        raw_scores(fused, w), raw_scores(fused, back), rtol=1e-5, atol=1e-6
    )
    again = tmp_path / "again.tpk"
    save_router_weights(again, back)
    twice = load_router_weights(again)
    np.testing.assert_array_equal(raw_scores(fused, back), raw_scores(fused, twice))


def test_weights_load_rejects_wrong_size(tmp_path):
    w = init_router_weights(0, d_in=8, d_hidden=4)
    path = tmp_path / "router.tpk"
    save_router_weights(path, w)
    import json

    (tmp_path / "router.tpk.json").write_text(json.dumps({"d_in": 9, "d_hidden": 4}))
    with pytest.raises(DataError):
        load_router_weights(path)
