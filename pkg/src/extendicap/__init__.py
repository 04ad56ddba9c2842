"""k-extendible quantum measurements and SDP capacity bounds."""

__version__ = "0.1.0"
