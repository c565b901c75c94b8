"""Posted-price mechanisms for a budget-constrained agent who may delegate to a principal."""

__version__ = "0.1.0"
