"""Command-line entry point: load the configured models, then serve."""

import argparse
import logging
import sys

from .config import ServiceConfig
from .encoders import ModelLoadError
from .server import ModelRegistry, build_http_app, stdio_loop


def parse_args(argv=None) -> ServiceConfig:
    ap = argparse.ArgumentParser(
        prog="embed-service",
        description="Embedding and pair-scoring service (line-JSON protocol). "
                    "Model ids starting with 'hash-' are deterministic local "
                    "encoders; other ids load via sentence-transformers.",
    )
    ap.add_argument("--clustering-model", default="hash-bi")
    ap.add_argument("--similarity-model", default="hash-bi")
    ap.add_argument("--cross-model", default="hash-cross")
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--max-batch", type=int, default=64)
    ap.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8876)
    ap.add_argument("--default-dim", type=int, default=384,
                    help="dimension for hash encoders without a -<dim> suffix")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    return ServiceConfig(
        clustering_model=args.clustering_model,
        similarity_model=args.similarity_model,
        cross_model=args.cross_model,
        device=args.device,
        max_batch=args.max_batch,
        transport=args.transport,
        host=args.host,
        port=args.port,
        default_dim=args.default_dim,
    ), args.verbose


def main(argv=None) -> int:
    try:
        config, verbose = parse_args(argv)
    except ValueError as exc:
        print(f"embed-service: {exc}", file=sys.stderr)
        return 2
    # stdout carries the protocol; all logging goes to stderr
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if verbose else logging.WARNING,
        format="%(name)s %(levelname)s %(message)s",
    )
    try:
        registry = ModelRegistry(config)
    except ModelLoadError as exc:
        print(f"embed-service: {exc}", file=sys.stderr)
        return 1
    if config.transport == "http":
        import uvicorn

        app = build_http_app(registry, config)
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
        return 0
    stdio_loop(registry, config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
