#!/usr/bin/env python3
"""Sweep retention ratios on one synthetic scene and print a small table
of quality, attention FLOPs, peak bank bytes, and FPS."""

import argparse

from prunekit.encoder import EncoderConfig
from prunekit.memsim import PipelineConfig, RefineConfig, propagate
from prunekit.metrics import jf_score
from prunekit.router import PruneConfig, load_router_weights
from prunekit.scenes import SceneConfig, generate_scene


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rhos", default="1.0,0.5,0.3,0.1")
    ap.add_argument("--frames", type=int, default=12)
    ap.add_argument("--size", type=int, default=224)
    ap.add_argument("--mc-passes", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--router-weights", default=None)
    return ap.parse_args()


def main():
    args = parse_args()
    video = generate_scene(
        SceneConfig(
            n_frames=args.frames,
            height=args.size,
            width=args.size,
            shape="square",
            size=float(16 * (args.size // 112)),
            motion="step",
            step_px=16,
            hold_frames=12,
            start=(float(16 * round(args.size / 32)), float(16 * round(args.size / 32))),
            seed=args.seed,
        )
    )
    router = (
        load_router_weights(args.router_weights) if args.router_weights else None
    )
    print(f"{'rho':>5} {'J&F':>7} {'attn GFLOP':>11} {'bank MB':>8} {'fps':>6}")
    for rho in (float(r) for r in args.rhos.split(",")):
        cfg = PipelineConfig(
            encoder=EncoderConfig(seed=args.seed),
            prune=PruneConfig(rho),
            mc_passes=args.mc_passes,
            router=router,
            refine=RefineConfig(enabled=False),
        )
        r = propagate(video, video.prompt, cfg)
        jf = jf_score([m.mask for m in r.masks], video.gt_masks)["mean_JF"]
        print(
            f"{rho:>5.2f} {jf:>7.4f} {r.ledger.flops_attention / 1e9:>11.3f} "
            f"{r.ledger.peak_memory_bytes / 1e6:>8.2f} {r.fps:>6.2f}"
        )


if __name__ == "__main__":
    main()
