"""Street-scene land-use classification from detected building boxes."""

__version__ = "0.1.0"
