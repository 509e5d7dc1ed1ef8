"""Stochastic fixed-wing flight simulator with a full GNC/INS stack."""

__version__ = "0.1.0"
