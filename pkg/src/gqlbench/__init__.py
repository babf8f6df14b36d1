"""Benchmark toolkit for GraphQL servers over a synthetic university dataset."""

__version__ = "0.1.0"
