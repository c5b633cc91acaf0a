"""Simulator and library for Bayesian deep learning through quantum-simulated Gaussian processes."""
from .errors import QBDLError

__version__ = "0.1.0"
