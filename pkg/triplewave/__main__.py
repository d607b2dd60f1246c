"""
Main entry point for triplewave.
This file allows running the tool as a module: python -m triplewave
"""

from .cli.cli import main

if __name__ == "__main__":
    main()
