"""Heavy inner-product identification between two sets of sign vectors."""

__version__ = "0.1.0"
