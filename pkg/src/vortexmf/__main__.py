"""Module entry point: python -m vortexmf."""

import sys

from vortexmf.cli import main

if __name__ == "__main__":
    sys.exit(main())
