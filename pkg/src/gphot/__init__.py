"""Photon-number statistics of Gaussian states via truncated power series."""

__version__ = "0.1.0"
