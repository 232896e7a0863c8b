"""Numerical KAM toolkit for almost periodic twist maps and the forced Duffing oscillator."""

__version__ = "0.1.0"
