"""Switch selection for radial distribution feeders under a stability index."""

__version__ = "0.1.0"
