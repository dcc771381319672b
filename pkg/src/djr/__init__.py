"""djr-verifier: verification toolkit for generalized del Junco-Rudolph shifts."""

__version__ = "0.1.0"
