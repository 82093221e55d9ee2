"""Set-valued Lie brackets and small-time controllability for nonsmooth vector fields."""

__version__ = "0.1.0"
