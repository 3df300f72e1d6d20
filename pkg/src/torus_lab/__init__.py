"""Exact-arithmetic laboratory for shrinking targets under integer matrix actions on the torus."""

__version__ = "0.1.0"
