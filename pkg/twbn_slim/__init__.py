"""Anytime treewidth-bounded Bayesian network structure learning by local MaxSAT improvement."""

__version__ = "0.1.0"
