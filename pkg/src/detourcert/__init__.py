"""Pointwise verification engine for conformal tractor operators and detour complexes."""

__version__ = "0.1.0"
