"""Quantization-aware energy-efficiency beamforming for MiLAC, digital and hybrid transmitters."""

__version__ = "0.1.0"
