"""Multi-agent peer-to-peer energy trading simulator for dairy farm communities."""

__version__ = "0.1.0"
