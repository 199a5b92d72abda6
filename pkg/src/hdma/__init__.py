"""Hybrid data management: relational data in, swap-test cluster assignments out."""

__version__ = "0.1.0"
