#!/usr/bin/env python3
"""Render a scene frame next to its MC-dropout uncertainty map so the
contrast between stable object cells and the ambiguous checkerboard band
is visible at a glance. Writes a PNG."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from prunekit.encoder import EncoderConfig
from prunekit.scenes import SceneConfig, generate_scene
from prunekit.uncertainty import mc_uncertainty


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-passes", type=int, default=5)
    ap.add_argument("--out", default="uncertainty_map.png")
    args = ap.parse_args()

    cfg = SceneConfig(
        n_frames=1,
        height=112,
        width=112,
        shape="square",
        size=24.0,
        start=(40.0, 40.0),
        noise_band=True,
        seed=100 + args.seed,
    )
    video = generate_scene(cfg)
    umap = mc_uncertainty(
        video.frames[0],
        EncoderConfig(seed=args.seed),
        args.t_passes,
        args.seed * 10,
    )
    side = 112 // 16

    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    axes[0].imshow(video.frames[0])
    axes[0].set_title("frame (band near bottom)")
    im = axes[1].imshow(umap.sigma_norm.reshape(side, side), cmap="magma")
    axes[1].set_title(f"normalized uncertainty, T={args.t_passes}")
    fig.colorbar(im, ax=axes[1], fraction=0.046)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
