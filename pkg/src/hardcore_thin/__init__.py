"""Hard-core thinnings of Poisson Boolean models of balls."""

__version__ = "0.1.0"
