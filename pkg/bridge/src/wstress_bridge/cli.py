"""Entry point: ``wstress-bridge --model <source> --task cls|reg``."""

from __future__ import annotations

import argparse
import sys

from .server import BridgeError, load_predictor, serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wstress-bridge",
        description="Serve a batch predictor over the v1 line protocol on stdio.",
    )
    parser.add_argument(
        "--model", required=True,
        help="predictor source: a .py exporting predict(rows), or a pickled model",
    )
    parser.add_argument("--task", required=True, choices=("cls", "reg"))
    args = parser.parse_args(argv)
    try:
        predictor = load_predictor(args.model)
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return serve(predictor, args.task)


if __name__ == "__main__":
    sys.exit(main())
