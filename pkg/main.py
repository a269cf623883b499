#!/usr/bin/env python3
"""
Imaginary-time Ground State Solver - Main Entry Point

Runs the command line interface for computing the ground state of the 1D
focusing cubic NLS by the normalized gradient flow and for the convergence
experiments built on it.
"""

import sys
import os
from src.cli import cli

def main():
    """Main entry point for the ground state solver."""
    try:
        # Add the src directory to the Python path
        sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

        cli()

    except KeyboardInterrupt:
        print("\nOperation cancelled by user.")
        sys.exit(1)

if __name__ == "__main__":
    main()
