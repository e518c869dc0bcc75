"""Dataset construction for router training on generated scenes.

Labels come from ground-truth mask overlap per token cell; features are
the same fused descriptors the router sees at inference time.
"""

from __future__ import annotations

import numpy as np

from .encoder import EncoderConfig, encode
from .router import (
    RouterTrainConfig,
    RouterWeights,
    fuse,
    init_router_weights,
    token_labels,
    train_router,
)
from .scenes import PALETTE, SceneConfig, VideoSequence, generate_scene
from .semantic import EmbedConfig, align_text, embed_text, fit_text_projection
from .uncertainty import (
    fit_uncertainty_projection,
    mc_uncertainty,
    uncertainty_features,
)


def training_suite(n_scenes: int = 8, base_seed: int = 500) -> list[SceneConfig]:
    """Small square scenes at varied positions/sizes/colors, disjoint in
    seed space from the evaluation suites."""
    colors = list(PALETTE)
    return [
        SceneConfig(
            n_frames=2,
            height=112,
            width=112,
            shape="square",
            size=16.0 + 8.0 * (i % 2),
            motion="step",
            step_px=16,
            hold_frames=1,
            start=(32.0 + 16.0 * (i % 3), 32.0 + 16.0 * (i // 3)),
            color_name=colors[i % len(colors)],
            seed=base_seed + i,
        )
        for i in range(n_scenes)
    ]


def build_router_dataset(
    videos: list[VideoSequence],
    enc: EncoderConfig = EncoderConfig(),
    embed_cfg: EmbedConfig = EmbedConfig(),
    mc_passes: int = 2,
    base_seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """(fused features, token labels) pairs over all frames of all videos.
    The semantic projection is fit on each video's first frame, matching
    the inference-time protocol."""
    dataset = []
    for video in videos:
        e_text = embed_text(video.prompt, embed_cfg)
        e_aligned = None
        for t, frame in enumerate(video.frames):
            grid = encode(frame, enc, frame_index=t)
            if e_aligned is None:
                e_aligned = align_text(fit_text_projection(grid, e_text), e_text)
            umap = mc_uncertainty(frame, enc, mc_passes, base_seed + t * mc_passes)
            uproj = fit_uncertainty_projection(grid, umap.sigma_norm)
            fused = fuse(grid, e_aligned, uncertainty_features(umap.sigma_norm, uproj))
            labels = token_labels(video.gt_masks[t], grid.grid_h, grid.grid_w)
            dataset.append((fused, labels))
    return dataset


def train_scene_router(
    n_scenes: int = 8,
    epochs: int = 80,
    seed: int = 0,
    enc: EncoderConfig = EncoderConfig(),
) -> RouterWeights:
    """Convenience wrapper: train on the standard training suite."""
    videos = [generate_scene(sc) for sc in training_suite(n_scenes)]
    dataset = build_router_dataset(videos, enc, base_seed=seed)
    cfg = RouterTrainConfig(epochs=epochs, seed=seed)
    weights, _ = train_router(dataset, cfg, init_router_weights(seed))
    return weights
