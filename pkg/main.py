#!/usr/bin/env python3
"""
Main entry point for the skewdyn command-line tool.
"""

import sys

from cli import run


def main() -> int:
    """Run the CLI on the process arguments and return its exit code."""
    return run(sys.argv[1:])


if __name__ == '__main__':
    sys.exit(main())
