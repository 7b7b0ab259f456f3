"""Simulation and analysis of feedback cooling of a Meissner-levitated micromagnet."""

__version__ = "0.1.0"
