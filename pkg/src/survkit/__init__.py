"""Survival analysis toolkit: Kaplan-Meier tables, five risk models, C-index comparison, MVI regression."""

__version__ = "0.1.0"
