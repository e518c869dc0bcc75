"""tokex: dump frozen-encoder features into TPK1 containers."""

from __future__ import annotations

import argparse
import sys

from .container import ExportError
from .export import ExportJob, export_text_embedding, export_visual_tokens
from .models import make_stub_weights


class UsageError(Exception):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def cmd_make_stub_weights(args) -> int:
    ids = make_stub_weights(args.weights, args.seed)
    print(f"wrote {ids['visual_model']} and {ids['text_model']} -> {args.weights}")
    return 0


def cmd_export_visual(args) -> int:
    job = ExportJob(
        weights_dir=args.weights,
        out_dir=args.out_dir,
        resize=args.resize,
        inputs=tuple(args.frames),
    )
    written = export_visual_tokens(job)
    print(f"{len(written)} token grids [{job.n_tokens}, 768] -> {args.out_dir}")
    return 0


def cmd_export_text(args) -> int:
    job = ExportJob(weights_dir=args.weights, out_dir=args.out_dir)
    export_text_embedding(args.prompt, job)
    print(f"text embedding [512] -> {args.out_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tokex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-stub-weights", help="write seeded reference checkpoints")
    p.add_argument("--weights", required=True, help="checkpoint directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_stub_weights)

    p = sub.add_parser("export-visual", help="frames -> [N, 768] token containers")
    p.add_argument("frames", nargs="+", help="image files, one container each")
    p.add_argument("--weights", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--resize", type=int, default=224)
    p.set_defaults(func=cmd_export_visual)

    p = sub.add_parser("export-text", help="prompt -> unit-norm [512] container")
    p.add_argument("--prompt", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(func=cmd_export_text)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
