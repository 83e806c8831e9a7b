"""Desk-scale simulator of system-bath Gibbs equilibration and analysis."""

__version__ = "0.1.0"
