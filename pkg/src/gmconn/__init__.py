"""Gauss-Manin connection toolkit for the versal A_mu deformation."""
__version__ = "0.1.0"
