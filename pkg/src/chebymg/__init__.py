"""Two-level geometric multigrid for the 2D Poisson problem with Chebyshev smoothers."""

__version__ = "0.1.0"
