#!/usr/bin/env python3
"""Main entry point for the ultrametric-wreath CLI."""

import sys

from ultrametric_wreath.cli import main

if __name__ == "__main__":
    sys.exit(main())
