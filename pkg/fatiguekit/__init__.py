"""Dynamic muscle fatigue evaluation for manual handling work."""

__version__ = "0.1.0"
