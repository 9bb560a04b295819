"""gradest: numerical workbench for gradient estimates of the Poisson
equation on model Riemannian manifolds."""

__version__ = "0.1.0"
