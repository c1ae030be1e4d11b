"""Branch points of eigenvalue maps of Hermitian pencils and perturbation-series radii of convergence."""

__version__ = "0.1.0"
