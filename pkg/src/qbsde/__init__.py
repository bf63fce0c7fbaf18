"""Deep BSDE solver with simulated quantum Monte Carlo and hybrid circuit layers."""

__version__ = "0.1.0"
