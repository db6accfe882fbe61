"""Command-line interface: ``embed-export export ...``."""

import argparse
import logging
import sys

from embed_export.errors import ExportError
from embed_export.exporter import DEFAULT_ENCODER, ExportConfig, export

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Write an EMBV1 embedding file for segments and sector names")
    parser.add_argument("--verbose", action="store_true",
                        help="log per-id truncation notices and debug detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="encode segments + sector names to EMBV1")
    p.add_argument("--segments", required=True, help="segments JSONL path")
    p.add_argument("--taxonomy", required=True, help="sector,company CSV path")
    p.add_argument("--encoder", default=DEFAULT_ENCODER,
                   help="encoder id: hash:<dim> (offline, deterministic) or a "
                        "locally available sentence-transformers model id "
                        f"(default {DEFAULT_ENCODER})")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize every output row")
    p.add_argument("--out", required=True, help="output EMBV1 path")
    p.set_defaults(func=cmd_export)
    return parser


def cmd_export(args) -> int:
    result = export(ExportConfig(segments_path=args.segments,
                                 taxonomy_path=args.taxonomy,
                                 out_path=args.out,
                                 encoder=args.encoder,
                                 normalize=args.normalize))
    print(f"rows {result.rows}")
    print(f"dim {result.dim}")
    print(f"truncated {result.truncated}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
