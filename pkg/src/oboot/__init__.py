"""Online bootstrapping for hashed linear learners."""

__version__ = "0.1.0"
