"""Decentralized auction-based task allocation with heuristic and learned bidders."""

__version__ = "0.1.0"
