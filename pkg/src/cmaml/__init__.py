"""Constrained model-agnostic meta-learning (C-MAML) at desk scale."""
__version__ = "0.1.0"
