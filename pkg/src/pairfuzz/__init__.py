"""Greybox fuzzing with mutator sequences scheduled from learned pair counts."""

__version__ = "0.1.0"
