#!/usr/bin/env python3
"""Run the permit API server.

    python scripts/serve.py [--config config.sample.env]

Equivalent to the `ptw-serve` console script.
"""

import sys

from ptw.api import main

if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
