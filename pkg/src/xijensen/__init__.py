"""Jensen polynomials of the Riemann xi-function in certified ball arithmetic."""

__version__ = "0.1.0"
