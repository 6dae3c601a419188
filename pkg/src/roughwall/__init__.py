"""Rough-channel Navier-Stokes toolkit: wall laws over periodic bumpy boundaries."""

__version__ = "0.1.0"
