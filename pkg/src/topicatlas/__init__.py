"""Hierarchical topic models over growing text collections, with an
exploratory-search service on top."""

__version__ = "0.1.0"
