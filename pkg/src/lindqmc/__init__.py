"""Sign-suppressed real-time quantum Monte Carlo for time-local master equations."""

__version__ = "0.1.0"
