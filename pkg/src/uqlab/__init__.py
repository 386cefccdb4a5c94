"""Predictive-uncertainty evaluation toolkit with a desk-scale BNN lab."""

__version__ = "0.1.0"
