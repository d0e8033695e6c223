#!/usr/bin/env python3
"""Launcher script for the osfuse command line."""

from osfuse.main import main

if __name__ == '__main__':
    main()
