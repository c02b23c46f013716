"""Security header fields for programmatic HTTP clients."""

__version__ = "0.1.0"
