"""Command-line entry point: groundforge-server --config server.json"""

from __future__ import annotations

import argparse
import logging
import sys

from .app import serve
from .config import ServerConfig, ServerConfigError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Serve the groundforge backend wire protocol."
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--mode", choices=("canned", "live"))
    parser.add_argument("--fixtures-dir")
    parser.add_argument("--port", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--no-fallback", action="store_true",
                        help="Disable the deterministic fallback generator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    data = {}
    if args.config:
        import json
        from pathlib import Path

        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
    if args.mode:
        data["mode"] = args.mode
    if args.fixtures_dir:
        data["fixtures_dir"] = args.fixtures_dir
    if args.port is not None:
        data["port"] = args.port
    if args.seed is not None:
        data["seed"] = args.seed
    if args.no_fallback:
        data["fallback"] = False
    try:
        config = ServerConfig.from_dict(data)
    except ServerConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
