"""Command line: serve a demo or fine-tuned transformer over the wire protocol."""

from __future__ import annotations

import argparse
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hfbridge", description="Serve a transformer classifier over attrfool/1."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="start answering protocol requests")
    source = serve.add_mutually_exclusive_group(required=True)
    source.add_argument("--demo", action="store_true",
                        help="seeded random-weight demo model (no downloads)")
    source.add_argument("--model-dir", help="fine-tuned classifier directory")
    serve.add_argument("--labels", type=int, default=2, help="demo label count")
    serve.add_argument("--seed", type=int, default=0, help="demo weight seed")
    serve.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=0)
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--ig-steps-cap", type=int, default=512)
    serve.add_argument("--no-sentence-sim", action="store_true")
    serve.add_argument("--no-perplexity", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .demo import build_demo_model, load_model_dir
    from .server import serve_stdio, serve_tcp

    if args.demo:
        model = build_demo_model(
            labels=args.labels,
            seed=args.seed,
            with_sentence_sim=not args.no_sentence_sim,
            with_language_model=not args.no_perplexity,
            ig_steps_cap=args.ig_steps_cap,
        )
    else:
        model = load_model_dir(
            args.model_dir,
            with_sentence_sim=not args.no_sentence_sim,
            ig_steps_cap=args.ig_steps_cap,
            device=args.device,
        )
    if args.transport == "stdio":
        serve_stdio(model)
    else:
        serve_tcp(model, args.host, args.port, ready_out=sys.stderr)
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
