#!/usr/bin/env python3
"""Run the bundled offline pipeline end to end against the mock endpoints.

Usage:
    python scripts/run_mock_pipeline.py [--out runs/mock]

Completes with no network beyond loopback; the scripted student lands at
75.0 combined accuracy on the 8-problem fixture.
"""

import argparse
import sys
from pathlib import Path

from mixdistill.cli import main

REPO = Path(__file__).parent.parent


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO / "runs" / "mock"))
    args = parser.parse_args()
    sys.exit(
        main(["pipeline", "--config", str(REPO / "configs" / "mock.yaml"), "--out", args.out])
    )
