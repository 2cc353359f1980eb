"""Information geometry of classical distributions and small quantum systems."""

__version__ = "0.1.0"
