"""Simulation of LUT synthesis, nearest-level modulation and a cascaded
double-H-bridge converter driving an RL load."""

__version__ = "0.1.0"
