"""Yang-Baxter toolkit: catalog, verifier, lifter and RLL chain tools for 4x4 R-matrices."""

__version__ = "0.1.0"
