#!/usr/bin/env python3
"""
Class-incremental fairness toolkit
Main entry point for the application
"""

from cilfair.cli import cli

if __name__ == '__main__':
    cli()
