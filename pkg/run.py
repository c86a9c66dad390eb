#!/usr/bin/env python
"""
OrthoPlane - pipeline entry point
"""
import sys

from orthoplane.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
