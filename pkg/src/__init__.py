"""randsurf - random-surface matrix model lab."""

__version__ = "0.1.0"
