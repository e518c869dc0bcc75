"""Command-line surface: prune a single token grid, run propagation on a
generated scene, sweep benchmarks, score mask directories, and train the
routing MLP.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchConfig, run_benchmark, write_csv, write_summary
from .container import (
    read_container,
    read_pgm,
    write_container,
    write_manifest,
    write_pgm,
)
from .encoder import EncoderConfig, TokenGrid
from .errors import PrunekitError, UsageError
from .memsim import PipelineConfig, RefineConfig, propagate
from .metrics import jf_score
from .router import (
    PruneConfig,
    RouterTrainConfig,
    fuse,
    heuristic_score,
    init_router_weights,
    load_router_weights,
    prune,
    save_router_weights,
    score,
    train_router,
)
from .scenes import SceneConfig, generate_scene
from .semantic import (
    EmbedConfig,
    TextEmbedding,
    align_text,
    embed_text,
    fit_text_projection,
)
from .uncertainty import fit_uncertainty_projection, uncertainty_features


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with 2
        raise UsageError(message)


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v)
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _float_tuple(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v)
    except ValueError as exc:
        raise UsageError(f"expected comma-separated floats, got {text!r}") from exc


def _embed_config(args) -> EmbedConfig:
    offline = args.offline_embed or args.embed_url is None
    return EmbedConfig(offline=offline, embed_seed=args.embed_seed, url=args.embed_url)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_embed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--offline-embed", action="store_true", help="seeded offline text embedding")
    p.add_argument("--embed-seed", type=int, default=7)
    p.add_argument("--embed-url", default=None, help="embedding provider base URL (or env PRUNEKIT_EMBED_URL)")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--rho", type=float, default=0.30, help="token retention ratio")
    p.add_argument("--retention-rule", choices=("ceil", "floor"), default="ceil")
    p.add_argument("--router-weights", default=None, help="path to trained router container")


def cmd_prune(args) -> int:
    out = _out_dir(args)
    tokens = read_container(args.tokens)
    if tokens.ndim != 2:
        raise UsageError(f"{args.tokens}: expected a rank-2 [N, d_v] container")
    n, d_v = tokens.shape
    side = math.isqrt(n)
    if side * side != n:
        raise UsageError(f"{args.tokens}: token count {n} is not a square grid")
    grid = TokenGrid(data=tokens, grid_h=side, grid_w=side)

    if args.embedding is not None:
        vec = read_container(args.embedding)
        if vec.ndim != 1:
            raise UsageError(f"{args.embedding}: expected a rank-1 embedding container")
        e_text = TextEmbedding(data=vec)
    elif args.prompt is not None:
        e_text = embed_text(args.prompt, _embed_config(args))
    else:
        raise UsageError("need --prompt or --embedding")

    proj = fit_text_projection(grid, e_text, args.ridge_lambda)
    e_aligned = align_text(proj, e_text)
    if args.sigma is not None:
        sigma = read_container(args.sigma)
        if sigma.shape != (n,):
            raise UsageError(f"{args.sigma}: expected shape ({n},)")
    else:
        sigma = np.zeros(n)  # no frame available, so no stochastic passes

    if args.router_weights is not None:
        weights = load_router_weights(args.router_weights)
        uproj = fit_uncertainty_projection(grid, sigma, args.ridge_lambda)
        alpha = score(fuse(grid, e_aligned, uncertainty_features(sigma, uproj)), weights)
    else:
        alpha = heuristic_score(grid, e_aligned, sigma)

    cfg = PruneConfig(retention_ratio=args.rho, k_rule=args.retention_rule)
    idx, pruned = prune(grid, alpha, cfg)
    write_manifest(out / "retained.json", {"indices": [int(i) for i in idx]})
    write_container(out / "alpha.tpk", alpha)
    write_container(out / "pruned.tpk", pruned.data)
    write_manifest(
        out / "manifest.json",
        {
            "command": "prune",
            "version": __version__,
            "tokens": str(args.tokens),
            "rho": args.rho,
            "retention_rule": args.retention_rule,
            "seed": args.seed,
            "n_tokens": n,
            "k": len(idx),
            "outputs": ["retained.json", "alpha.tpk", "pruned.tpk"],
        },
    )
    print(f"retained {len(idx)}/{n} tokens -> {out}")
    return 0


def _pipeline_config(args) -> PipelineConfig:
    if args.mc_passes < 2:
        raise UsageError("--mc-passes must be at least 2")
    enc = EncoderConfig(
        dropout_layers=tuple(args.dropout_layers),
        tap_layer=args.tap_layer,
        seed=args.seed,
    )
    router = load_router_weights(args.router_weights) if args.router_weights else None
    return PipelineConfig(
        encoder=enc,
        prune=PruneConfig(retention_ratio=args.rho, k_rule=args.retention_rule),
        mc_passes=args.mc_passes,
        base_seed=args.seed,
        embed=_embed_config(args),
        router=router,
        signals=args.signals,
        refine=RefineConfig(
            enabled=not args.no_refine,
            threshold=args.refine_threshold,
            max_rounds=args.max_rounds,
            clicks_per_round=args.clicks_per_round,
        ),
    )


def cmd_propagate(args) -> int:
    out = _out_dir(args)
    scene = SceneConfig(
        n_frames=args.frames,
        height=args.height,
        width=args.width,
        shape=args.scene,
        motion=args.motion,
        color_name=args.color,
        seed=args.seed,
    )
    video = generate_scene(scene)
    cfg = _pipeline_config(args)
    prompt = args.prompt if args.prompt is not None else video.prompt
    result = propagate(video, prompt, cfg)

    mask_files = []
    for pred in result.masks:
        name = f"mask_{pred.frame_index:04d}.pgm"
        write_pgm(out / name, pred.mask)
        mask_files.append(name)
    write_manifest(out / "ledger.json", result.ledger.to_dict())
    write_manifest(out / "refinement.json", result.refinement_log)
    write_manifest(
        out / "manifest.json",
        {
            "command": "propagate",
            "version": __version__,
            "scene": args.scene,
            "frames": args.frames,
            "prompt": prompt,
            "rho": args.rho,
            "mc_passes": args.mc_passes,
            "signals": args.signals,
            "seed": args.seed,
            "clicks": len(result.clicks),
            "rounds_used": result.rounds_used,
            "masks": mask_files,
        },
    )
    print(
        f"{len(result.masks)} masks, {len(result.clicks)} clicks, "
        f"{result.fps:.2f} fps -> {out}"
    )
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    cfg = BenchConfig(
        rhos=tuple(args.rhos),
        t_passes=tuple(args.t_passes),
        signal_sets=tuple(args.signals.split(";")),
        seeds=tuple(args.seeds),
        scene=SceneConfig(n_frames=args.frames, seed=args.seed),
    )
    report = run_benchmark(cfg)
    write_csv(report, str(out / "bench.csv"))
    write_summary(report, str(out / "summary.json"))
    failed = sum(1 for c in report.cells if c.error is not None)
    print(f"{len(report.cells)} cells ({failed} failed) -> {out}")
    return 0


def cmd_eval(args) -> int:
    preds = sorted(Path(args.pred_dir).glob("*.pgm"))
    gts = sorted(Path(args.gt_dir).glob("*.pgm"))
    if not preds or len(preds) != len(gts):
        raise UsageError(
            f"mask count mismatch: {len(preds)} predictions vs {len(gts)} ground truth"
        )
    scores = jf_score([read_pgm(p) for p in preds], [read_pgm(g) for g in gts])
    out = _out_dir(args)
    write_manifest(out / "scores.json", scores)
    print(
        f"mean J {scores['mean_J']:.4f}  mean F {scores['mean_F']:.4f}  "
        f"mean J&F {scores['mean_JF']:.4f} -> {out}"
    )
    return 0


def cmd_train_router(args) -> int:
    out = _out_dir(args)
    enc = EncoderConfig(seed=args.seed)
    from .training import build_router_dataset, training_suite

    videos = [generate_scene(sc) for sc in training_suite(args.scenes)]
    dataset = build_router_dataset(
        videos, enc, _embed_config(args), args.mc_passes, args.seed
    )
    train_cfg = RouterTrainConfig(epochs=args.epochs, seed=args.seed)
    weights, losses = train_router(dataset, train_cfg, init_router_weights(args.seed))
    save_router_weights(out / "router.tpk", weights)
    write_manifest(
        out / "manifest.json",
        {
            "command": "train-router",
            "version": __version__,
            "scenes": args.scenes,
            "frames": args.frames,
            "epochs": args.epochs,
            "seed": args.seed,
            "final_loss": losses[-1] if losses else None,
            "outputs": ["router.tpk", "router.tpk.json"],
        },
    )
    print(f"trained router ({args.epochs} epochs, final loss "
          f"{losses[-1]:.4f}) -> {out}" if losses else f"saved init -> {out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="prunekit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="score and prune a single token-grid container")
    _add_common_flags(p)
    _add_embed_flags(p)
    p.add_argument("--tokens", required=True, help="rank-2 [N, d_v] token container")
    p.add_argument("--prompt", default=None)
    p.add_argument("--embedding", default=None, help="rank-1 text-embedding container")
    p.add_argument("--sigma", default=None, help="optional rank-1 uncertainty container")
    p.add_argument("--ridge-lambda", type=float, default=1e-3)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("propagate", help="run the full loop on a generated scene")
    _add_common_flags(p)
    _add_embed_flags(p)
    p.add_argument("--scene", choices=("disk", "square", "ring"), default="disk")
    p.add_argument("--frames", type=int, default=90)
    p.add_argument("--height", type=int, default=224)
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--motion", choices=("linear", "circular", "step"), default="linear")
    p.add_argument("--color", default="red")
    p.add_argument("--prompt", default=None, help="override the scene's generated prompt")
    p.add_argument("--mc-passes", type=int, default=5)
    p.add_argument("--dropout-layers", type=_int_tuple, default=(3, 4, 5))
    p.add_argument("--tap-layer", type=int, default=5)
    p.add_argument("--signals", choices=("text", "text+uncertainty"), default="text+uncertainty")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--refine-threshold", type=float, default=0.80)
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--clicks-per-round", type=int, default=3)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("bench", help="sweep retention/passes/signals and write CSV")
    _add_common_flags(p)
    p.add_argument("--rhos", type=_float_tuple, default=(1.0, 0.5, 0.3, 0.1))
    p.add_argument("--t-passes", type=_int_tuple, default=(4, 5, 6))
    p.add_argument("--seeds", type=_int_tuple, default=(0, 1, 2, 3, 4))
    p.add_argument("--signals", default="text+uncertainty;text",
                   help="semicolon-separated signal sets")
    p.add_argument("--frames", type=int, default=12)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-router", help="fit router weights on generated scenes")
    _add_common_flags(p)
    _add_embed_flags(p)
    p.add_argument("--scenes", type=int, default=4)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--mc-passes", type=int, default=5)
    p.set_defaults(func=cmd_train_router)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except PrunekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
