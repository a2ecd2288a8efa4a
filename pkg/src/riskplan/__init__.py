"""Risk-averse mission planning with simulation-based plan assessment."""

__version__ = "0.1.0"
