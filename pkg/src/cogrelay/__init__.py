"""Relay/beamforming designs for a wirelessly powered cognitive relay network."""

__version__ = "0.1.0"
