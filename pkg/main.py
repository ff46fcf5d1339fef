"""Main entry point - randsurf lab."""

from src.cli import main

if __name__ == "__main__":
    main()
