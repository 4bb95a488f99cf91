"""Command line entry point: load the manifest, load models, serve."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from simaug_sidecar.manifest import ManifestError, ModelManifest
from simaug_sidecar.models import SidecarError, load_runtime
from simaug_sidecar.service import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simaug-sidecar",
        description="serve generation, embedding, and classification models over HTTP",
    )
    parser.add_argument("--manifest", required=True, help="path to the model manifest JSON")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument(
        "--check",
        action="store_true",
        help="load the manifest and models, report what would be served, and exit",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = ModelManifest.from_json_file(args.manifest)
        runtime = load_runtime(manifest)
    except (ManifestError, SidecarError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.check:
        for model_id in runtime.model_ids():
            print(f"loaded: {model_id}")
        print(f"embedding dim: {runtime.embedder.dim}")
        return 0
    uvicorn.run(create_app(runtime), host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
