#!/usr/bin/env python3
"""Run a seeded development server (equivalent to `aegis serve --seed-demo`).

Used by the console's end-to-end tests and for manual exploration:

    python scripts/run_demo_server.py --port 8000 [--data-dir .demo-data]

Prints the seeded credentials as JSON on startup.
"""

import argparse
import json
from pathlib import Path

import uvicorn

from aegis.api import create_app
from aegis.config import PlatformConfig
from aegis.platform import GovernancePlatform


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--data-dir", default=None)
    args = parser.parse_args()

    config = PlatformConfig(data_dir=Path(args.data_dir) if args.data_dir else None)
    platform = GovernancePlatform(config)
    info = platform.seed_demo()
    print(json.dumps(info, indent=2), flush=True)
    uvicorn.run(create_app(platform), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
