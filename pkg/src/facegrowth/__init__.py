"""Facial growth direction prediction from longitudinal cephalometric landmarks."""

__version__ = "0.1.0"
