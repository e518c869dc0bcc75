#!/usr/bin/env python3
"""Train the retention router on small generated scenes, save the
weights, and report tracking quality with and without it at rho=0.3."""

import argparse
from pathlib import Path

from prunekit.encoder import EncoderConfig
from prunekit.memsim import PipelineConfig, RefineConfig, propagate
from prunekit.metrics import jf_score
from prunekit.router import PruneConfig, save_router_weights
from prunekit.scenes import SceneConfig, generate_scene
from prunekit.training import train_scene_router


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenes", type=int, default=8)
    ap.add_argument("--epochs", type=int, default=80)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="router.tpk")
    args = ap.parse_args()

    weights = train_scene_router(args.scenes, args.epochs, args.seed)
    save_router_weights(Path(args.out), weights)
    print(f"saved {args.out}")

    video = generate_scene(
        SceneConfig(
            n_frames=12,
            height=112,
            width=112,
            shape="square",
            size=16.0,
            motion="step",
            step_px=16,
            hold_frames=12,
            start=(48.0, 48.0),
            seed=123,
        )
    )
    for label, router in (("heuristic", None), ("router", weights)):
        cfg = PipelineConfig(
            encoder=EncoderConfig(seed=args.seed),
            prune=PruneConfig(0.30),
            mc_passes=2,
            router=router,
            refine=RefineConfig(enabled=False),
        )
        r = propagate(video, video.prompt, cfg)
        jf = jf_score([m.mask for m in r.masks], video.gt_masks)["mean_JF"]
        print(f"{label:>9}: J&F {jf:.4f} at rho=0.30")


if __name__ == "__main__":
    main()
