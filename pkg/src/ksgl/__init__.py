"""Kronecker-sum graphical lasso (TeraLasso) estimation and experiment tools."""

__version__ = "0.1.0"
