"""Design and analysis toolkit for a linear generator with HTS field magnets."""

__version__ = "0.1.0"
