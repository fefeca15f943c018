"""Dictionary-based indexing of electron diffraction pattern scans."""

__version__ = "1.0.0"
